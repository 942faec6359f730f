use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use sepcert::corrdata::FORMAT_VERSION;
use sepcert::momentmat::SymmetryScheme;
use sepcert::physmodels::{
    commensurate_grid, concurrence_robustness, optimal_structure_witness, quench_amplitudes, quench_dataset,
    thermal_dataset_ed, werner_dataset, ModelSpec, QuenchAmplitudes,
};
use sepcert::sdpcore::{certify, dual_feasibility_residual, Certification, CertifyOptions, SchemeChoice, SolveStatus, SolverOptions};
use sepcert::seporacle::{dataset_of, max_over_product_states, random_product_state, SearchOptions, SeparableMixture};
use sepcert::witnesslab::{bipartite_witness_value, eval_witness, Orientation, PhaseAssignment, Witness};
use sepcert::{CorrelationDataset, Error};

use crate::cli::{Cli, Command, GenerateKind, GlobalArgs, ModelArg, OracleAction, SchemeArg, SweepKind, WitnessAction};

/// Exit codes; a stable interface.
pub const EXIT_SEPARABLE: u8 = 0;
pub const EXIT_SOLVER_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ENTANGLED: u8 = 3;

/// A product-state search matches a bound when it lands this close to it.
const MATCH_TOL: f64 = 1e-4;

#[derive(Debug)]
pub enum Failure {
    /// Bad parameters or unreadable inputs.
    Usage(String),
    /// Outputs could not be written.
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Output(_) => EXIT_SOLVER_FAILURE,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Output(m) => m,
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Files written by a run, relative to the output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|e| Failure::Output(format!("{}: {e}", path.display())))
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), Failure> {
        let mut body = serde_json::to_string_pretty(value).expect("JSON values serialize");
        body.push('\n');
        self.text(name, &body)
    }
}

pub fn execute(cli: &Cli) -> Result<u8, Failure> {
    let solver = solver_options(&cli.global);
    solver.validate().map_err(usage)?;
    fs::create_dir_all(&cli.global.out).map_err(|e| Failure::Output(format!("{}: {e}", cli.global.out.display())))?;
    let mut out = Outputs {
        dir: cli.global.out.clone(),
        files: Vec::new(),
    };
    let code = match &cli.command {
        Command::Generate { kind } => generate(kind, &cli.global, &mut out)?,
        Command::Certify { dataset } => certify_cmd(dataset, &cli.global, &mut out)?,
        Command::Witness {
            action: WitnessAction::Eval { witness, dataset },
        } => witness_eval(witness, dataset, &mut out)?,
        Command::Oracle {
            action: OracleAction::ProductSearch { witness, n, restarts },
        } => product_search(witness, *n, *restarts, &cli.global, &mut out)?,
        Command::Sweep { kind } => sweep(kind, &cli.global, &mut out)?,
    };
    let mut files = out.files.clone();
    files.sort();
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "tool": "sepcert",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config": cli,
        "solver": solver,
        "outputs": files,
        "exit_code": code,
    });
    out.json("manifest.json", &manifest)?;
    Ok(code)
}

fn solver_options(g: &GlobalArgs) -> SolverOptions {
    SolverOptions {
        gap_tol: g.tol,
        feas_tol: g.tol,
        max_iter: g.max_iter,
        ..SolverOptions::default()
    }
}

fn certify_options(g: &GlobalArgs, ds: &CorrelationDataset) -> CertifyOptions {
    let scheme = match g.scheme {
        SchemeArg::Auto => SchemeChoice::Auto,
        SchemeArg::General => SchemeChoice::Fixed(SymmetryScheme::General),
        SchemeArg::Axis => SchemeChoice::Fixed(SymmetryScheme::AxisDiagonal(SymmetryScheme::infer_axis(ds))),
        SchemeArg::Transverse => SchemeChoice::Fixed(SymmetryScheme::TransverseSymmetric(SymmetryScheme::infer_axis(ds))),
        SchemeArg::Rotation => SchemeChoice::Fixed(SymmetryScheme::RotationInvariant),
    };
    CertifyOptions {
        level: g.level as usize,
        scheme,
        solver: solver_options(g),
        ..CertifyOptions::default()
    }
}

fn model_spec(model: ModelArg, n: usize, g: f64) -> ModelSpec {
    match model {
        ModelArg::Heisenberg => ModelSpec::heisenberg(n),
        ModelArg::Ising => ModelSpec::ising(n, g),
    }
}

fn generate(kind: &GenerateKind, g: &GlobalArgs, out: &mut Outputs) -> Result<u8, Failure> {
    let ds = match *kind {
        GenerateKind::Werner { lambda } => werner_dataset(lambda),
        GenerateKind::Quench1d { n, time } => quench_amplitudes(n, time).and_then(|a| quench_dataset(&a)),
        GenerateKind::Thermal { model, n, temp, g: field } => thermal_dataset_ed(&model_spec(model, n, field), temp),
        GenerateKind::ProductRandom { n } => {
            if n == 0 {
                return Err(Failure::Usage("product-random needs at least one site".into()));
            }
            Ok(dataset_of(&SeparableMixture::pure(random_product_state(n, g.seed))))
        }
    }
    .map_err(usage)?;
    let path = out.path("dataset.json");
    ds.write(&path).map_err(|e| Failure::Output(e.to_string()))?;
    println!("wrote {} correlators on {} sites to {}", ds.len(), ds.n_sites(), path.display());
    Ok(EXIT_SEPARABLE)
}

fn read_dataset(path: &Path) -> Result<CorrelationDataset, Failure> {
    CorrelationDataset::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_witness(path: &Path) -> Result<Witness, Failure> {
    Witness::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::PrimalInfeasible => "primal-infeasible",
        SolveStatus::NumericalTrouble => "numerical-trouble",
        SolveStatus::IterationLimit => "iteration-limit",
    }
}

fn exit_code(c: &Certification) -> u8 {
    if c.solution.status != SolveStatus::Optimal {
        EXIT_SOLVER_FAILURE
    } else if c.entangled() {
        EXIT_ENTANGLED
    } else {
        EXIT_SEPARABLE
    }
}

fn certify_cmd(dataset: &Path, g: &GlobalArgs, out: &mut Outputs) -> Result<u8, Failure> {
    let ds = read_dataset(dataset)?;
    let cert = certify(&ds, &certify_options(g, &ds)).map_err(usage)?;
    let s = &cert.solution;
    if let Some(w) = &cert.witness {
        let path = out.path("witness.json");
        w.write(&path).map_err(|e| Failure::Output(e.to_string()))?;
    }
    let solution = json!({
        "format_version": FORMAT_VERSION,
        "status": status_name(s.status),
        "entangled": cert.entangled(),
        "lambda_star": s.lambda_star,
        "primal_objective": s.primal_objective,
        "dual_objective": s.dual_objective,
        "duality_gap": s.duality_gap,
        "primal_infeasibility": s.primal_infeasibility,
        "dual_infeasibility": s.dual_infeasibility,
        "dual_feasibility_residual": dual_feasibility_residual(&cert.problem, &s.y),
        "iterations": s.iterations,
        "level": g.level,
        "scheme": cert.layout.scheme.to_string(),
        "moment_matrix_dim": cert.problem.gamma_dim,
        "witness": cert.witness.as_ref().map(|_| "witness.json"),
    });
    out.json("solution.json", &solution)?;
    if g.dump_layout {
        out.text("layout.txt", &cert.layout.dump())?;
    }
    if g.solver_trace {
        out.json("trace.json", &json!({ "format_version": FORMAT_VERSION, "iterations": s.trace }))?;
    }
    let code = exit_code(&cert);
    let verdict = match code {
        EXIT_ENTANGLED => "entangled",
        EXIT_SEPARABLE => "separable-compatible",
        _ => "solver failure",
    };
    println!("lambda* = {:.9}", s.lambda_star);
    println!("duality gap = {:.3e} ({} iterations, {})", s.duality_gap, s.iterations, status_name(s.status));
    println!("verdict: {verdict}");
    Ok(code)
}

fn orientation_name(o: Orientation) -> &'static str {
    match o {
        Orientation::Upper => "upper",
        Orientation::Lower => "lower",
    }
}

fn witness_eval(witness: &Path, dataset: &Path, out: &mut Outputs) -> Result<u8, Failure> {
    let w = read_witness(witness)?;
    let ds = read_dataset(dataset)?;
    let e = eval_witness(&w, &ds).map_err(usage)?;
    out.json(
        "evaluation.json",
        &json!({
            "format_version": FORMAT_VERSION,
            "value": e.value,
            "bound": w.separable_bound,
            "orientation": orientation_name(w.orientation),
            "violated": e.violated,
            "margin": e.margin,
        }),
    )?;
    println!("value = {:.9}, bound = {:.9} ({})", e.value, w.separable_bound, orientation_name(w.orientation));
    println!("violated: {}", e.violated);
    Ok(if e.violated { EXIT_ENTANGLED } else { EXIT_SEPARABLE })
}

fn product_search(witness: &Path, n: Option<usize>, restarts: usize, g: &GlobalArgs, out: &mut Outputs) -> Result<u8, Failure> {
    let w = read_witness(witness)?;
    let n = n.unwrap_or_else(|| w.min_sites());
    let opts = SearchOptions {
        seed: g.seed,
        ..SearchOptions::default()
    };
    let r = max_over_product_states(&w, n, restarts, &opts).map_err(usage)?;
    let diff = r.best_value - w.separable_bound;
    let matched = diff.abs() <= MATCH_TOL;
    out.json(
        "product_search.json",
        &json!({
            "format_version": FORMAT_VERSION,
            "sites": n,
            "restarts": restarts,
            "seed": g.seed,
            "orientation": orientation_name(w.orientation),
            "best_value": r.best_value,
            "bound": w.separable_bound,
            "difference": diff,
            "matched": matched,
            "match_tolerance": MATCH_TOL,
            "best_restart": r.best_restart,
            "converged_restarts": r.converged,
            "best_state": r.best_state.bloch(),
        }),
    )?;
    println!("best product value = {:.9}, bound = {:.9}, difference = {diff:.3e}", r.best_value, w.separable_bound);
    println!("bound matched within {MATCH_TOL:e} by local search: {matched}");
    Ok(EXIT_SEPARABLE)
}

struct SweepRow {
    parameter: f64,
    lambda_star: Option<f64>,
    gap: Option<f64>,
    iterations: Option<usize>,
    structure: Option<f64>,
    bipartite: Option<f64>,
    concurrence: Option<f64>,
    status: String,
}

fn sweep_point(parameter: f64, make: impl Fn(f64) -> sepcert::Result<(CorrelationDataset, Option<QuenchAmplitudes>)>, g: &GlobalArgs) -> SweepRow {
    let mut row = SweepRow {
        parameter,
        lambda_star: None,
        gap: None,
        iterations: None,
        structure: None,
        bipartite: None,
        concurrence: None,
        status: String::new(),
    };
    let (ds, amps) = match make(parameter) {
        Ok(v) => v,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.structure = optimal_structure_witness(&ds, &commensurate_grid(ds.n_sites())).ok().map(|o| o.value);
    row.bipartite = bipartite_witness_value(&ds, &PhaseAssignment::zeros(ds.n_sites())).ok();
    row.concurrence = amps.as_ref().map(concurrence_robustness);
    match certify(&ds, &certify_options(g, &ds)) {
        Ok(c) => {
            row.lambda_star = Some(c.solution.lambda_star);
            row.gap = Some(c.solution.duality_gap);
            row.iterations = Some(c.solution.iterations);
            row.status = status_name(c.solution.status).to_string();
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn sweep(kind: &SweepKind, g: &GlobalArgs, out: &mut Outputs) -> Result<u8, Failure> {
    let grid: &[f64] = match kind {
        SweepKind::Werner { lambda } => lambda,
        SweepKind::Quench1d { time, .. } => time,
        SweepKind::Thermal { temp, .. } => temp,
    };
    if grid.is_empty() {
        return Err(Failure::Usage("parameter grid is empty".into()));
    }
    let make = |p: f64| -> sepcert::Result<(CorrelationDataset, Option<QuenchAmplitudes>)> {
        match *kind {
            SweepKind::Werner { .. } => Ok((werner_dataset(p)?, None)),
            SweepKind::Quench1d { n, .. } => {
                let amps = quench_amplitudes(n, p)?;
                Ok((quench_dataset(&amps)?, Some(amps)))
            }
            SweepKind::Thermal { model, n, g: field, .. } => Ok((thermal_dataset_ed(&model_spec(model, n, field), p)?, None)),
        }
    };
    // points are independent; collect keeps grid order
    let rows: Vec<SweepRow> = grid.par_iter().map(|&p| sweep_point(p, make, g)).collect();
    let path = out.path("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Output(e.to_string()))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let result: csv::Result<()> = (|| {
        w.write_record([
            "parameter",
            "lambda_star",
            "gap",
            "iterations",
            "structure_witness",
            "bipartite_witness",
            "concurrence_robustness",
            "status",
        ])?;
        for r in &rows {
            w.write_record([
                r.parameter.to_string(),
                opt(r.lambda_star),
                r.gap.map(|g| format!("{g:e}")).unwrap_or_default(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                opt(r.structure),
                opt(r.bipartite),
                opt(r.concurrence),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    result.map_err(|e| Failure::Output(e.to_string()))?;
    let failed = rows.iter().filter(|r| r.status != "optimal").count();
    println!("wrote {} rows to {} ({failed} not optimal)", rows.len(), path.display());
    Ok(EXIT_SEPARABLE)
}
