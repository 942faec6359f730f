use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "sepcert", version, about = "Certify entanglement from partial correlation data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Directory receiving every output file and the run manifest.
    #[arg(long, global = true, default_value = "sepcert-out")]
    pub out: PathBuf,
    /// Seed for random generators and the product-state search.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Duality-gap and feasibility tolerance of the SDP solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    pub max_iter: usize,
    /// Hierarchy level of the moment matrix.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub level: u8,
    #[arg(long, global = true, value_enum, default_value_t = SchemeArg::Auto)]
    pub scheme: SchemeArg,
    /// Write the moment-matrix pattern to layout.txt.
    #[arg(long, global = true)]
    pub dump_layout: bool,
    /// Write per-iteration solver records to trace.json.
    #[arg(long, global = true)]
    pub solver_trace: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Auto,
    General,
    Axis,
    Transverse,
    Rotation,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a correlation dataset to dataset.json.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Solve the separability relaxation; exit 3 when entanglement is detected.
    Certify { dataset: PathBuf },
    Witness {
        #[command(subcommand)]
        action: WitnessAction,
    },
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Certify every point of a parameter grid and write sweep.csv.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Heisenberg,
    Ising,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    /// Singlet mixed with white noise of weight `lambda`.
    Werner {
        #[arg(long)]
        lambda: f64,
    },
    /// Single spin flip on a ring evolved under the XX model.
    #[command(name = "quench-1d")]
    Quench1d {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        time: f64,
    },
    /// Gibbs state of a spin ring by exact diagonalization.
    Thermal {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        temp: f64,
        /// Transverse field of the Ising model.
        #[arg(long, default_value_t = 1.0)]
        g: f64,
    },
    /// Random pure product state drawn from `--seed`.
    ProductRandom {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessAction {
    /// Evaluate a witness file on a dataset; exit 3 when it is violated.
    Eval { witness: PathBuf, dataset: PathBuf },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleAction {
    /// Extremize a witness over product states and compare with its bound.
    ProductSearch {
        witness: PathBuf,
        /// Number of sites; defaults to the largest site the witness touches.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        restarts: usize,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Werner {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        lambda: Vec<f64>,
    },
    #[command(name = "quench-1d")]
    Quench1d {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        time: Vec<f64>,
    },
    Thermal {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        temp: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Certify { .. } => "certify",
            Command::Witness { .. } => "witness eval",
            Command::Oracle { .. } => "oracle product-search",
            Command::Sweep { .. } => "sweep",
        }
    }
}
