//! Linear entanglement witnesses and the analytic witness families.
//!
//! A [`Witness`] is `sum_alpha w_alpha C_alpha` with a separable bound and an
//! orientation saying on which side of the bound separable states lie.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corrdata::{parse_error, Axis, CollectiveMoments, CorrelationDataset, Label, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::physmodels::structure_factor;
use crate::sdpcore::{solve, Constraint, ConstraintKind, SdpProblem, SolveStatus, SolverOptions, SparseEntry};

/// Margin beyond which a witness counts as violated.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Separable bound of `sum_a S^a_{k_a}` for qubits.
pub const QUBIT_STRUCTURE_BOUND: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Separable states satisfy `value <= bound`.
    Upper,
    /// Separable states satisfy `value >= bound`.
    Lower,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Upper => 1.0,
            Orientation::Lower => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    DualCertificate,
    StructureFactor,
    Bipartite,
    PhaseFamily,
    SpinSqueezing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub coefficients: BTreeMap<Label, f64>,
    pub separable_bound: f64,
    pub orientation: Orientation,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessEvaluation {
    pub value: f64,
    pub violated: bool,
    /// Signed distance past the bound in the entangled direction; positive when violated.
    pub margin: f64,
}

impl Witness {
    /// Largest site index referenced, plus one.
    pub fn min_sites(&self) -> usize {
        self.coefficients.keys().map(|l| l.max_site() + 1).max().unwrap_or(0)
    }

    /// Same witness written as `value <= bound`.
    pub fn as_upper(&self) -> Witness {
        let s = self.orientation.sign();
        Witness {
            coefficients: self.coefficients.iter().map(|(l, v)| (*l, s * v)).collect(),
            separable_bound: s * self.separable_bound,
            orientation: Orientation::Upper,
            provenance: self.provenance,
        }
    }

    /// `sum_alpha w_alpha C_alpha` without checking the bound.
    pub fn value(&self, ds: &CorrelationDataset) -> Result<f64> {
        let mut missing = Vec::new();
        let mut sum = 0.0;
        for (label, w) in &self.coefficients {
            match ds.get(label) {
                Some(c) => sum += w * c,
                None => missing.push(*label),
            }
        }
        if missing.is_empty() {
            Ok(sum)
        } else {
            Err(Error::MissingData(missing))
        }
    }

    fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::InvalidParameter("witness has no coefficients".into()));
        }
        if !self.separable_bound.is_finite() || self.coefficients.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("witness has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = WitnessDocument {
            format_version: FORMAT_VERSION,
            coefficients: self
                .coefficients
                .iter()
                .map(|(label, value)| CoefficientRecord { label: *label, value: *value })
                .collect(),
            bound: self.separable_bound,
            orientation: self.orientation,
            provenance: Some(self.provenance),
        };
        serde_json::to_string_pretty(&doc).expect("witness serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WitnessDocument = serde_json::from_str(text).map_err(parse_error)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: format!("unsupported format_version {}", doc.format_version),
            });
        }
        let mut coefficients = BTreeMap::new();
        for (k, rec) in doc.coefficients.into_iter().enumerate() {
            if coefficients.insert(rec.label, rec.value).is_some() {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("coefficients[{k}]: duplicate label {}", rec.label),
                });
            }
        }
        let w = Witness {
            coefficients,
            separable_bound: doc.bound,
            orientation: doc.orientation,
            provenance: doc.provenance.unwrap_or(Provenance::DualCertificate),
        };
        w.validate().map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Ok(w)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CoefficientRecord {
    label: Label,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct WitnessDocument {
    format_version: u32,
    coefficients: Vec<CoefficientRecord>,
    bound: f64,
    orientation: Orientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

pub fn eval_witness(witness: &Witness, ds: &CorrelationDataset) -> Result<WitnessEvaluation> {
    let value = witness.value(ds)?;
    let margin = witness.orientation.sign() * (value - witness.separable_bound);
    Ok(WitnessEvaluation {
        value,
        violated: margin > VIOLATION_TOL,
        margin,
    })
}

/// Local phases `phi_a(j)` in radians, one triple per site indexed by [`Axis::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAssignment {
    pub phases: Vec<[f64; 3]>,
}

impl PhaseAssignment {
    pub fn zeros(n: usize) -> Self {
        PhaseAssignment { phases: vec![[0.0; 3]; n] }
    }

    /// `phi_a(j) = k_a r_j` on a chain.
    pub fn wavevectors(n: usize, k: [f64; 3]) -> Self {
        PhaseAssignment {
            phases: (0..n).map(|j| k.map(|ka| ka * j as f64)).collect(),
        }
    }

    /// `phi_X = phi_Z = pi` on odd sites, zero elsewhere.
    pub fn staggered_xz(n: usize) -> Self {
        PhaseAssignment {
            phases: (0..n).map(|j| if j % 2 == 1 { [PI, 0.0, PI] } else { [0.0; 3] }).collect(),
        }
    }

    fn get(&self, site: usize, axis: Axis) -> f64 {
        self.phases[site][axis.index()]
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.phases.len() != n {
            return Err(Error::BadSize(format!("{} phase triples for {n} sites", self.phases.len())));
        }
        Ok(())
    }
}

/// Witness from same-axis pair coefficients `g(i, j, axis)` over all pairs `i < j`.
fn pair_witness(
    n: usize,
    bound: f64,
    provenance: Provenance,
    mut g: impl FnMut(usize, usize, Axis) -> Option<f64>,
) -> Witness {
    let mut coefficients = BTreeMap::new();
    for a in Axis::ALL {
        for i in 0..n {
            for j in i + 1..n {
                if let Some(w) = g(i, j, a) {
                    coefficients.insert(Label::two(i, j, a, a), w);
                }
            }
        }
    }
    Witness {
        coefficients,
        separable_bound: bound,
        orientation: Orientation::Lower,
        provenance,
    }
}

/// `sum_a sum_{j != j'} cos(phi_a(j') - phi_a(j)) C_jj'^aa >= -N`.
pub fn phase_witness(n: usize, phases: &PhaseAssignment) -> Result<Witness> {
    phases.check(n)?;
    Ok(pair_witness(n, -(n as f64), Provenance::PhaseFamily, |i, j, a| {
        Some(2.0 * (phases.get(j, a) - phases.get(i, a)).cos())
    }))
}

pub fn phase_witness_value(ds: &CorrelationDataset, phases: &PhaseAssignment) -> Result<f64> {
    phase_witness(ds.n_sites(), phases)?.value(ds)
}

/// `sum_a S^a_{k_a} >= 2` for qubits, with `S` normalized by `1/N` and the
/// diagonal `C_jj^aa = 1` included.
pub fn structure_witness_value<const D: usize>(
    ds: &CorrelationDataset,
    k: [[f64; D]; 3],
    positions: &[[f64; D]],
) -> Result<f64> {
    let mut total = 0.0;
    let mut missing = Vec::new();
    for a in Axis::ALL {
        match structure_factor(ds, k[a.index()], a, positions) {
            Ok(s) => total += s.value,
            Err(Error::MissingData(m)) => missing.extend(m),
            Err(e) => return Err(e),
        }
    }
    if missing.is_empty() {
        Ok(total)
    } else {
        Err(Error::MissingData(missing))
    }
}

/// Structure-factor witness as a linear functional of the pair data.
///
/// The diagonal terms contribute the constant 3, so the linear part is bounded
/// below by `2 - 3 = -1`.
pub fn structure_witness<const D: usize>(k: [[f64; D]; 3], positions: &[[f64; D]]) -> Witness {
    let n = positions.len();
    pair_witness(n, QUBIT_STRUCTURE_BOUND - 3.0, Provenance::StructureFactor, |i, j, a| {
        let ka = k[a.index()];
        let phase: f64 = (0..D).map(|d| ka[d] * (positions[j][d] - positions[i][d])).sum();
        Some(2.0 * phase.cos() / n as f64)
    })
}

/// Separable lower bounds of the spin-`s` structure-factor sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinStructureBound {
    /// For `S = N^-1 sum_{j,j'}` with spin operators (so a qubit gives 1/2).
    pub normalized: f64,
    /// For the unnormalized double sum.
    pub total: f64,
}

pub fn spin_s_structure_bound(n: usize, s: f64) -> SpinStructureBound {
    SpinStructureBound {
        normalized: s,
        total: n as f64 * s,
    }
}

/// Interface kernel `K_r` for the even/odd bipartition of a ring of `n` sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteKernel {
    pub n: usize,
    /// `K_r` indexed by `r mod n`.
    values: Vec<f64>,
}

impl BipartiteKernel {
    pub fn k(&self, r: i64) -> f64 {
        self.values[r.rem_euclid(self.n as i64) as usize]
    }
}

/// `(2/N) sum_{k=-N/4+1}^{N/4-1} cos(2 pi k r / N)`.
pub fn kernel_direct(n: usize, r: i64) -> f64 {
    let q = (n / 4) as i64;
    let s: f64 = (-q + 1..q).map(|k| (2.0 * PI * (k * r) as f64 / n as f64).cos()).sum();
    2.0 * s / n as f64
}

/// `(2/N) [sin(pi r/2) / tan(pi r/N) - cos(pi r/2)]`, continued to `1 - 2/N` at `r = 0`.
pub fn kernel_closed(n: usize, r: i64) -> f64 {
    let nf = n as f64;
    if r.rem_euclid(n as i64) == 0 {
        return 1.0 - 2.0 / nf;
    }
    // exact values of the quarter-period trigonometry avoid rounding in sin(pi r / 2)
    let (sin_h, cos_h) = match r.rem_euclid(4) {
        0 => (0.0, 1.0),
        1 => (1.0, 0.0),
        2 => (0.0, -1.0),
        _ => (-1.0, 0.0),
    };
    2.0 / nf * (sin_h / (PI * r as f64 / nf).tan() - cos_h)
}

/// `2 (-1)^((r-1)/2) / (N tan(pi r / N))` for odd `r`.
pub fn kernel_odd(n: usize, r: i64) -> f64 {
    debug_assert!(r.rem_euclid(2) == 1);
    let sign = if (r - 1).div_euclid(2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    2.0 * sign / (n as f64 * (PI * r as f64 / n as f64).tan())
}

pub fn bipartite_kernel(n: usize) -> Result<BipartiteKernel> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::BadSize(format!("bipartite kernel needs n divisible by 4, got {n}")));
    }
    Ok(BipartiteKernel {
        n,
        values: (0..n as i64).map(|r| kernel_closed(n, r)).collect(),
    })
}

/// `W = sum_a sum_{i even} sum_{j odd} K_{j-i} cos(phi_a(i) - phi_a(j)) C_ij^aa >= -N/2`.
pub fn bipartite_witness(n: usize, phases: &PhaseAssignment) -> Result<Witness> {
    let kernel = bipartite_kernel(n)?;
    phases.check(n)?;
    Ok(pair_witness(n, -(n as f64) / 2.0, Provenance::Bipartite, |i, j, a| {
        if (i + j) % 2 == 0 {
            return None;
        }
        // orient as (even, odd); K and cos are even functions so the order only fixes r
        let (ia, jb) = if i % 2 == 0 { (i, j) } else { (j, i) };
        Some(kernel.k(jb as i64 - ia as i64) * (phases.get(ia, a) - phases.get(jb, a)).cos())
    }))
}

pub fn bipartite_witness_value(ds: &CorrelationDataset, phases: &PhaseAssignment) -> Result<f64> {
    bipartite_witness(ds.n_sites(), phases)?.value(ds)
}

/// One generalized spin-squeezing inequality, `lhs <= 1` for separable states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingResult {
    pub lhs: f64,
    pub satisfied: bool,
}

/// The eight permutation-invariant inequalities on `m_a`, `C_aa`.
///
/// Order: `sum C`, then the three single-axis forms (`z`, `x`, `y` squeezed),
/// then the three two-axis forms (`x`, `y`, `z` kept), then the full form.
pub fn spin_squeezing_check(moments: &CollectiveMoments) -> [SqueezingResult; 8] {
    let nf = moments.n_sites as f64;
    let (m, c) = (moments.m, moments.c);
    let m2 = |a: usize| m[a] * m[a];
    let (x, y, z) = (0, 1, 2);
    // a kept, the other two (b, d) squeezed
    let two_axis = |a: usize, b: usize, d: usize| c[a] + nf * (m2(b) + m2(d)) - (nf - 1.0) * (c[b] + c[d]);
    let one_axis = |a: usize, b: usize, d: usize| c[b] + c[d] + nf * m2(a) - (nf - 1.0) * c[a];
    let lhs = [
        c[x] + c[y] + c[z],
        one_axis(z, x, y),
        one_axis(x, y, z),
        one_axis(y, z, x),
        two_axis(x, y, z),
        two_axis(y, z, x),
        two_axis(z, x, y),
        nf * (m2(x) + m2(y) + m2(z)) - (nf - 1.0) * (c[x] + c[y] + c[z]),
    ];
    lhs.map(|lhs| SqueezingResult {
        lhs,
        satisfied: lhs <= 1.0 + VIOLATION_TOL,
    })
}

/// Outcome of the three-qubit covariance-matrix criterion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmcResult {
    /// False only when the dual certificate proves the block condition fails by more than `tol`.
    pub feasible: bool,
    /// Certified lower bound on the smallest uniform diagonal shift `t` making
    /// the block condition hold; the data are refuted iff this exceeds `tol`.
    pub shift: f64,
    /// Shift attained by the primal iterate, an upper bound up to its residual.
    pub shift_upper: f64,
    pub status: SolveStatus,
}

/// Default feasibility tolerance of [`cmc_check`].
pub const CMC_TOL: f64 = 1e-8;

/// Is there `rho_i >= 0`, `tr rho_i = 1`, with `[[rho_1, C_12, C_13], ..] - c c^T >= 0`?
///
/// The data are refuted only by a dual certificate; a solver that stops early
/// therefore errs towards "feasible", never towards a false detection. Solved as `min t` over `P = B(rho) - c c^T + t 1 >= 0`. With `tr P = 3 - |c|^2 + 9t`
/// and `P >= 0` forcing `t >= -1/3`, the shifted variable `s = t + 1` stays strictly positive.
pub fn cmc_check(ds: &CorrelationDataset, tol: f64) -> Result<CmcResult> {
    if ds.n_sites() != 3 {
        return Err(Error::BadSize(format!("covariance-matrix check is for 3 sites, got {}", ds.n_sites())));
    }
    let mut missing = Vec::new();
    let mut c = [0.0; 9];
    for i in 0..3 {
        for a in Axis::ALL {
            match ds.one(i, a) {
                Some(v) => c[3 * i + a.index()] = v,
                None => missing.push(Label::one(i, a)),
            }
        }
    }
    let mut cij = [[0.0; 9]; 9];
    for i in 0..3 {
        for j in i + 1..3 {
            for a in Axis::ALL {
                for b in Axis::ALL {
                    match ds.two(i, j, a, b) {
                        Some(v) => {
                            cij[3 * i + a.index()][3 * j + b.index()] = v;
                            cij[3 * j + b.index()][3 * i + a.index()] = v;
                        }
                        None => missing.push(Label::two(i, j, a, b)),
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }

    // blocks: 0 = s, 1 = P (9x9), 2..5 = rho_i (3x3)
    let mut constraints = Vec::new();
    for p in 0..9 {
        for q in p..9 {
            let fixed = |entries: Vec<SparseEntry>, rhs: f64| Constraint {
                kind: ConstraintKind::Fixed,
                entries,
                rhs,
            };
            let (si, sj) = (p / 3, q / 3);
            if si != sj {
                constraints.push(fixed(vec![SparseEntry::new(1, p, q, 1.0)], cij[p][q] - c[p] * c[q]));
            } else {
                let mut entries = vec![SparseEntry::new(1, p, q, 1.0), SparseEntry::new(2 + si, p % 3, q % 3, -1.0)];
                let mut rhs = -c[p] * c[q];
                if p == q {
                    entries.push(SparseEntry::new(0, 0, 0, -1.0));
                    rhs -= 1.0;
                }
                constraints.push(fixed(entries, rhs));
            }
        }
    }
    for i in 0..3 {
        constraints.push(Constraint {
            kind: ConstraintKind::Fixed,
            entries: (0..3).map(|a| SparseEntry::new(2 + i, a, a, 1.0)).collect(),
            rhs: 1.0,
        });
    }
    let problem = SdpProblem {
        block_dims: vec![1, 9, 3, 3, 3],
        objective: vec![SparseEntry::new(0, 0, 0, 1.0)],
        constraints,
        initial_diag: vec![1.0, 1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        gamma_dim: 0,
        block_indices: vec![Vec::new(); 5],
    };
    let sol = solve(
        &problem,
        &SolverOptions {
            gap_tol: 1e-10,
            feas_tol: 1e-10,
            ..Default::default()
        },
    );
    // Weak duality with a residual: for any feasible X', s' >= b.y - |Rd|_F |X'|_F. The
    // primal value is no substitute, since near a degenerate boundary it only approaches
    // the optimum like sqrt(mu). Here |Rd|_F = 2 * dual_infeasibility (|C|_F = 1), and any
    // X' with t' <= t_up has |rho_i|_F <= 1, |P|_F <= tr P <= 3 + 9 t_up, s' <= 1 + t_up.
    let t_up = (sol.primal_objective - 1.0).max(0.0);
    let x_bound = 7.0 + 10.0 * t_up;
    let shift = sol.dual_objective - 1.0 - 2.0 * sol.dual_infeasibility * x_bound;
    Ok(CmcResult {
        feasible: !(shift > tol),
        shift,
        shift_upper: sol.primal_objective - 1.0,
        status: sol.status,
    })
}
