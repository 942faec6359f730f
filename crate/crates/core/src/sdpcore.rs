//! Noise-robustness SDP: assembly from a moment-matrix layout, a primal-dual
//! interior-point solver, and certificate extraction.
//!
//! Standard form: `min <C, X>` s.t. `<A_k, X> = b_k`, `X = diag(X_0, X_1, ...) >= 0`,
//! with dual `max b.y` s.t. `Z = C - sum_k y_k A_k >= 0`. Block 0 is the scalar
//! noise level `lambda`; the remaining blocks are the connected pieces of `Gamma`.

use std::collections::{BTreeMap, HashMap};

use faer::{Mat, MatRef, Par, Side};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::corrdata::{CorrelationDataset, Label};
use crate::error::{Error, Result};
use crate::momentmat::{build_layout, monomial_basis, select_scheme, DataExpr, EntryKind, MomentMatrixLayout, SymmetryScheme};
use crate::witnesslab::{Orientation, Provenance, Witness};

/// `value * X_block[row, col]` inside `<A, X>`; stored with `row <= col`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl SparseEntry {
    pub fn new(block: usize, row: usize, col: usize, value: f64) -> Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        SparseEntry { block, row, col, value }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `lambda * E + Gamma_entry = E` for the data expression `E`.
    Data(DataExpr),
    /// Sphere constraint (per-site Pauli row or higher-level substitution).
    Pauli,
    /// Entry pinned to a constant, including zeros inside a block.
    Fixed,
    /// Two entries of the same free moment.
    Tie,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub entries: Vec<SparseEntry>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: Vec<SparseEntry>,
    pub constraints: Vec<Constraint>,
    /// Diagonal of the initial primal point, per block.
    pub initial_diag: Vec<f64>,
    /// Dimension of the full moment matrix the blocks were cut from.
    pub gamma_dim: usize,
    /// Moment-matrix indices of each block (empty for the scalar block).
    pub block_indices: Vec<Vec<usize>>,
}

impl SdpProblem {
    pub fn n_data(&self) -> usize {
        self.constraints.iter().filter(|c| matches!(c.kind, ConstraintKind::Data(_))).count()
    }

    pub fn n_pauli(&self) -> usize {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Pauli).count()
    }

    pub fn n_fixed(&self) -> usize {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Fixed).count()
    }

    pub fn n_ties(&self) -> usize {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Tie).count()
    }

    fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// `(A(K))_k = <A_k, K>` for block matrices `K` (symmetrized on the fly).
    fn apply_a(&self, k: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints.iter().map(|c| entries_dot(&c.entries, k)).collect()
    }

    /// `sum_k y_k A_k` restricted to the constraints selected by `keep`.
    fn apply_at_filtered(&self, y: &[f64], keep: impl Fn(&Constraint) -> bool) -> Vec<DMatrix<f64>> {
        let mut out = self.zeros();
        for (c, &yk) in self.constraints.iter().zip(y) {
            if keep(c) {
                add_entries(&mut out, &c.entries, yk);
            }
        }
        out
    }

    fn apply_at(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        self.apply_at_filtered(y, |_| true)
    }

    fn objective_matrix(&self) -> Vec<DMatrix<f64>> {
        let mut c = self.zeros();
        add_entries(&mut c, &self.objective, 1.0);
        c
    }

    fn zeros(&self) -> Vec<DMatrix<f64>> {
        self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect()
    }
}

fn entries_dot(entries: &[SparseEntry], k: &[DMatrix<f64>]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let m = &k[e.block];
            e.value * 0.5 * (m[(e.row, e.col)] + m[(e.col, e.row)])
        })
        .sum()
}

fn add_entries(out: &mut [DMatrix<f64>], entries: &[SparseEntry], scale: f64) {
    for e in entries {
        let m = &mut out[e.block];
        if e.row == e.col {
            m[(e.row, e.row)] += scale * e.value;
        } else {
            m[(e.row, e.col)] += 0.5 * scale * e.value;
            m[(e.col, e.row)] += 0.5 * scale * e.value;
        }
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Connected components of the non-zero pattern, each sorted, ordered by first index.
fn components(layout: &MomentMatrixLayout) -> Vec<Vec<usize>> {
    let d = layout.dim();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for r in 0..d {
        for c in r + 1..d {
            let zero = matches!(layout.kind(r, c), EntryKind::Zero) || *layout.kind(r, c) == EntryKind::Constant(0.0);
            if !zero {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..d {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Standard-form problem for a layout.
///
/// Blocks whose entries are all constant are checked and dropped. Blocks with
/// identical entry patterns (for example the `x` and `y` blocks under transverse
/// symmetry) carry the same moments and are merged into one.
pub fn assemble_primal(layout: &MomentMatrixLayout) -> SdpProblem {
    let ds = &layout.dataset;
    let comps = components(layout);

    let mut canonical: Vec<Vec<usize>> = Vec::new();
    // moment-matrix index -> (block, position)
    let mut place: HashMap<usize, (usize, usize)> = HashMap::new();
    for comp in comps {
        let all_const = comp
            .iter()
            .all(|&r| comp.iter().all(|&c| matches!(layout.kind(r, c), EntryKind::Constant(_) | EntryKind::Zero)));
        if all_const {
            continue;
        }
        let same = canonical.iter().position(|other| {
            other.len() == comp.len()
                && (0..comp.len()).all(|p| (p..comp.len()).all(|q| layout.kind(other[p], other[q]) == layout.kind(comp[p], comp[q])))
        });
        let b = match same {
            Some(b) => b,
            None => {
                canonical.push(comp.clone());
                canonical.len() - 1
            }
        };
        for (p, &i) in comp.iter().enumerate() {
            place.insert(i, (b + 1, p));
        }
    }

    let mut block_dims = vec![1];
    block_dims.extend(canonical.iter().map(|c| c.len()));
    let mut constraints = Vec::new();
    let mut reps: HashMap<usize, SparseEntry> = HashMap::new();
    for (b0, comp) in canonical.iter().enumerate() {
        let b = b0 + 1;
        for p in 0..comp.len() {
            for q in p..comp.len() {
                let entry = SparseEntry::new(b, p, q, 1.0);
                match layout.kind(comp[p], comp[q]) {
                    EntryKind::Data(expr) => {
                        let e = expr.value(ds);
                        let mut entries = vec![entry];
                        if e != 0.0 {
                            entries.insert(0, SparseEntry::new(0, 0, 0, e));
                        }
                        constraints.push(Constraint {
                            kind: ConstraintKind::Data(expr.clone()),
                            entries,
                            rhs: e,
                        });
                    }
                    EntryKind::Constant(v) => constraints.push(Constraint {
                        kind: ConstraintKind::Fixed,
                        entries: vec![entry],
                        rhs: *v,
                    }),
                    EntryKind::Zero => constraints.push(Constraint {
                        kind: ConstraintKind::Fixed,
                        entries: vec![entry],
                        rhs: 0.0,
                    }),
                    EntryKind::FreeVar(id) => match reps.get(id) {
                        None => {
                            reps.insert(*id, entry);
                        }
                        Some(rep) => constraints.push(Constraint {
                            kind: ConstraintKind::Tie,
                            entries: vec![entry, SparseEntry { value: -1.0, ..*rep }],
                            rhs: 0.0,
                        }),
                    },
                }
            }
        }
    }

    for pc in &layout.pauli_constraints {
        let mut rhs = pc.rhs;
        let mut terms: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &((r, c), coef) in &pc.terms {
            if let EntryKind::Constant(v) = layout.kind(r, c) {
                rhs -= coef * v;
                continue;
            }
            let (&(b, p), &(b2, q)) = (&place[&r], &place[&c]);
            debug_assert_eq!(b, b2);
            let e = SparseEntry::new(b, p, q, coef);
            *terms.entry((e.block, e.row, e.col)).or_default() += coef;
        }
        let entries: Vec<SparseEntry> = terms
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((b, r, c), v)| SparseEntry::new(b, r, c, v))
            .collect();
        if !entries.is_empty() {
            constraints.push(Constraint {
                kind: ConstraintKind::Pauli,
                entries,
                rhs,
            });
        }
    }

    let mut initial_diag = vec![1.0];
    initial_diag.extend(std::iter::repeat(1.0 / 3.0).take(canonical.len()));
    let mut block_indices = vec![Vec::new()];
    block_indices.extend(canonical);
    SdpProblem {
        block_dims,
        objective: vec![SparseEntry::new(0, 0, 0, 1.0)],
        constraints,
        initial_diag,
        gamma_dim: layout.dim(),
        block_indices,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    pub initial_point_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            initial_point_scale: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::InvalidParameter("step fraction must lie in (0, 1)".into()));
        }
        if !(self.initial_point_scale > 0.0) {
            return Err(Error::InvalidParameter("initial point scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    NumericalTrouble,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
    pub sigma: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Certified optimal value: the dual objective. For problems built by
    /// [`assemble_primal`] this is the noise robustness.
    pub lambda_star: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub x: Vec<DMatrix<f64>>,
    /// Multipliers of all constraints, in problem order.
    pub y: Vec<f64>,
    /// Multipliers of the data constraints.
    pub w_data: Vec<f64>,
    /// Multipliers of the structural (sphere, fixed, tie) constraints.
    pub w_pauli: Vec<f64>,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

/// `1/4 [X_qr Zi_sp + X_qs Zi_rp + X_pr Zi_sq + X_ps Zi_rq]` = `tr(E_pq X E_rs Zi)` symmetrized.
#[inline]
fn schur_kernel(x: &DMatrix<f64>, zi: &DMatrix<f64>, p: usize, q: usize, r: usize, s: usize) -> f64 {
    0.25 * (x[(q, r)] * zi[(s, p)] + x[(q, s)] * zi[(r, p)] + x[(p, r)] * zi[(s, q)] + x[(p, s)] * zi[(r, q)])
}

/// Dense Schur matrix `M_kl = tr(A_k X A_l Z^-1)`, column-major, both triangles filled.
fn schur_matrix(problem: &SdpProblem, x: &[DMatrix<f64>], zi: &[DMatrix<f64>]) -> Vec<f64> {
    let m = problem.constraints.len();
    let mut buf = vec![0.0; m * m];
    buf.par_chunks_mut(m).enumerate().for_each(|(l, col)| {
        let cl = &problem.constraints[l].entries;
        for (k, out) in col.iter_mut().enumerate().skip(l) {
            let ck = &problem.constraints[k].entries;
            let mut s = 0.0;
            for e in ck {
                for f in cl {
                    if e.block == f.block {
                        s += e.value * f.value * schur_kernel(&x[e.block], &zi[e.block], e.row, e.col, f.row, f.col);
                    }
                }
            }
            *out = s;
        }
    });
    for l in 0..m {
        for k in l + 1..m {
            buf[k * m + l] = buf[l * m + k];
        }
    }
    buf
}

struct SchurSolver {
    m: usize,
    full: Vec<f64>,
    llt: faer::linalg::solvers::Llt<f64>,
}

impl SchurSolver {
    fn new(mut full: Vec<f64>, m: usize) -> Option<Self> {
        let max_diag = (0..m).map(|i| full[i * m + i].abs()).fold(0.0, f64::max).max(1e-300);
        for attempt in 0..4 {
            if attempt > 0 {
                let shift = max_diag * 1e-14 * 100f64.powi(attempt - 1);
                for i in 0..m {
                    full[i * m + i] += shift;
                }
            }
            let a = MatRef::from_column_major_slice(&full, m, m);
            if let Ok(llt) = a.llt(Side::Lower) {
                return Some(SchurSolver { m, full, llt });
            }
        }
        None
    }

    /// Solve with two steps of iterative refinement against the assembled matrix.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let m = self.m;
        let mut x = Mat::<f64>::from_fn(m, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(&mut x);
        for _ in 0..2 {
            let a = MatRef::from_column_major_slice(&self.full, m, m);
            let ax = a * &x;
            let mut r = Mat::<f64>::from_fn(m, 1, |i, _| rhs[i] - ax[(i, 0)]);
            self.llt.solve_in_place(&mut r);
            x += &r;
        }
        (0..m).map(|i| x[(i, 0)]).collect()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest `alpha` with `X + alpha D >= 0`, given `X = L L^T`.
fn max_step(l: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (lb, db) in l.iter().zip(d) {
        let lb_tri = lb.clone();
        let left = lb_tri.solve_lower_triangular(db).expect("nonsingular factor");
        let mut s = lb_tri.solve_lower_triangular(&left.transpose()).expect("nonsingular factor");
        symmetrize(&mut s);
        let min = if s.nrows() == 1 { s[(0, 0)] } else { SymmetricEigen::new(s).eigenvalues.min() };
        if min < 0.0 {
            alpha = alpha.min(-1.0 / min);
        }
    }
    alpha
}

fn cholesky_blocks(x: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    x.iter().map(|b| Cholesky::new(b.clone()).map(|c| c.l())).collect()
}

fn add_scaled(a: &[DMatrix<f64>], b: &[DMatrix<f64>], s: f64) -> Vec<DMatrix<f64>> {
    a.iter().zip(b).map(|(x, y)| x + y * s).collect()
}

/// Primal-dual path following with the HKM direction and Mehrotra predictor-corrector,
/// from the infeasible start `X = diag(initial) * scale`, `Z = 1`, `y = 0`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    faer::set_global_parallelism(Par::Seq);
    let nblocks = problem.block_dims.len();
    let n_total: usize = problem.block_dims.iter().sum();
    let b = problem.rhs();
    let c = problem.objective_matrix();
    let (norm_b, norm_c) = (norm2(&b), frob(&c));

    let mut x: Vec<DMatrix<f64>> = (0..nblocks)
        .map(|k| DMatrix::identity(problem.block_dims[k], problem.block_dims[k]) * (problem.initial_diag[k] * opts.initial_point_scale))
        .collect();
    let mut z: Vec<DMatrix<f64>> = problem.block_dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let mut y = vec![0.0; problem.constraints.len()];
    let mut trace = Vec::new();
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;

    let measure = |x: &[DMatrix<f64>], y: &[f64], z: &[DMatrix<f64>]| {
        let ax = problem.apply_a(x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let aty = problem.apply_at(y);
        let rd: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &c[k] - &aty[k] - &z[k]).collect();
        let pobj = inner(&c, x);
        let dobj: f64 = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
        (rp, rd, pobj, dobj)
    };

    for iter in 0..opts.max_iter {
        iterations = iter;
        let (rp, rd, pobj, dobj) = measure(&x, &y, &z);
        let gap = (pobj - dobj).abs();
        let pinf = norm2(&rp) / (1.0 + norm_b);
        let dinf = frob(&rd) / (1.0 + norm_c);
        let mu = inner(&x, &z) / n_total as f64;
        let mut record = IterationRecord {
            iteration: iter,
            primal_objective: pobj,
            dual_objective: dobj,
            gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            mu,
            sigma: f64::NAN,
            step_primal: f64::NAN,
            step_dual: f64::NAN,
        };
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            trace.push(record);
            status = SolveStatus::Optimal;
            break;
        }

        let zi: Option<Vec<DMatrix<f64>>> = z.iter().map(|zb| Cholesky::new(zb.clone()).map(|ch| ch.inverse())).collect();
        let (Some(zi), Some(lx), Some(lz)) = (zi, cholesky_blocks(&x), cholesky_blocks(&z)) else {
            trace.push(record);
            status = SolveStatus::NumericalTrouble;
            break;
        };
        let Some(schur) = SchurSolver::new(schur_matrix(problem, &x, &zi), problem.constraints.len()) else {
            trace.push(record);
            status = SolveStatus::NumericalTrouble;
            break;
        };

        // X Rd Z^-1 is shared by predictor and corrector
        let x_rd_zi: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &x[k] * &rd[k] * &zi[k]).collect();
        let a_x_rd_zi = problem.apply_a(&x_rd_zi);

        let direction = |sigma: f64, corr: Option<&[DMatrix<f64>]>| {
            // M dy = rp - A(sigma mu Zi - X - corr) + A(X Rd Zi)
            let target: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|k| {
                    let mut t = &zi[k] * (sigma * mu) - &x[k];
                    if let Some(cr) = corr {
                        t -= &cr[k];
                    }
                    t
                })
                .collect();
            let a_t = problem.apply_a(&target);
            let rhs: Vec<f64> = (0..rp.len()).map(|i| rp[i] - a_t[i] + a_x_rd_zi[i]).collect();
            let mut dy = schur.solve(&rhs);
            // refine against the exact operator: the assembled M carries the rounding of Z^-1,
            // which would otherwise leave A(dX) != rp and block the primal step near the boundary
            let mut last = f64::INFINITY;
            loop {
                let at_dy = problem.apply_at(&dy);
                let dz: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &rd[k] - &at_dy[k]).collect();
                let dx: Vec<DMatrix<f64>> = (0..nblocks)
                    .map(|k| {
                        let mut d = &target[k] - &x[k] * &dz[k] * &zi[k];
                        symmetrize(&mut d);
                        d
                    })
                    .collect();
                let adx = problem.apply_a(&dx);
                let res: Vec<f64> = rp.iter().zip(&adx).map(|(a, b)| a - b).collect();
                let r = norm2(&res);
                if r <= 1e-15 * (1.0 + norm_b) || r >= 0.5 * last {
                    break (dx, dy, dz);
                }
                last = r;
                for (d, e) in dy.iter_mut().zip(schur.solve(&res)) {
                    *d += e;
                }
            }
        };

        let (dx_a, _, dz_a) = direction(0.0, None);
        let ap = max_step(&lx, &dx_a).min(1.0);
        let ad = max_step(&lz, &dz_a).min(1.0);
        let ratio = inner(&add_scaled(&x, &dx_a, ap), &add_scaled(&z, &dz_a, ad)) / inner(&x, &z);
        let sigma = ratio.clamp(0.0, 1.0).powi(3);
        let corr: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &dx_a[k] * &dz_a[k] * &zi[k]).collect();
        let (dx, dy, dz) = direction(sigma, Some(&corr));

        let ap = (opts.step_fraction * max_step(&lx, &dx)).min(1.0);
        let ad = (opts.step_fraction * max_step(&lz, &dz)).min(1.0);
        record.sigma = sigma;
        record.step_primal = ap;
        record.step_dual = ad;
        trace.push(record);
        if !(ap > 0.0 && ad > 0.0) || dy.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalTrouble;
            break;
        }
        x = add_scaled(&x, &dx, ap);
        z = add_scaled(&z, &dz, ad);
        for (yi, di) in y.iter_mut().zip(&dy) {
            *yi += ad * di;
        }
        iterations = iter + 1;
    }

    let (rp, rd, pobj, dobj) = measure(&x, &y, &z);
    let mut w_data = Vec::new();
    let mut w_pauli = Vec::new();
    for (con, &yk) in problem.constraints.iter().zip(&y) {
        match con.kind {
            ConstraintKind::Data(_) => w_data.push(yk),
            _ => w_pauli.push(yk),
        }
    }
    SdpSolution {
        status,
        lambda_star: dobj,
        primal_objective: pobj,
        dual_objective: dobj,
        x,
        y,
        w_data,
        w_pauli,
        duality_gap: (pobj - dobj).abs(),
        primal_infeasibility: norm2(&rp) / (1.0 + norm_b),
        dual_infeasibility: frob(&rd) / (1.0 + norm_c),
        iterations,
        trace,
    }
}

/// Largest eigenvalue of `sum_k y_k A_k` over the moment-matrix blocks; the
/// certificate is dual feasible when this is `<= 0`.
pub fn dual_feasibility_residual(problem: &SdpProblem, y: &[f64]) -> f64 {
    let s = problem.apply_at_filtered(y, |_| true);
    s.into_iter()
        .skip(1)
        .map(|m| SymmetricEigen::new(m).eigenvalues.max())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Default threshold separating detected entanglement from numerical noise.
pub const DETECTION_THRESHOLD: f64 = 1e-6;

/// Witness `sum_alpha w_alpha C_alpha <= 1 - lambda*` from the data multipliers.
pub fn extract_witness(solution: &SdpSolution, problem: &SdpProblem, threshold: f64) -> Result<Witness> {
    if solution.status != SolveStatus::Optimal || solution.lambda_star <= threshold {
        return Err(Error::NotEntangled(solution.lambda_star));
    }
    let mut coefficients: BTreeMap<Label, f64> = BTreeMap::new();
    for (con, &yk) in problem.constraints.iter().zip(&solution.y) {
        if let ConstraintKind::Data(expr) = &con.kind {
            for (label, coef) in &expr.0 {
                *coefficients.entry(*label).or_default() += yk * coef;
            }
        }
    }
    Ok(Witness {
        coefficients,
        separable_bound: 1.0 - solution.lambda_star,
        orientation: Orientation::Upper,
        provenance: Provenance::DualCertificate,
    })
}

/// How the symmetry scheme is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeChoice {
    Auto,
    Fixed(SymmetryScheme),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    pub level: usize,
    pub scheme: SchemeChoice,
    pub solver: SolverOptions,
    pub threshold: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            level: 1,
            scheme: SchemeChoice::Auto,
            solver: SolverOptions::default(),
            threshold: DETECTION_THRESHOLD,
        }
    }
}

pub struct Certification {
    pub layout: MomentMatrixLayout,
    pub problem: SdpProblem,
    pub solution: SdpSolution,
    /// Present when the data are certified entangled.
    pub witness: Option<Witness>,
}

impl Certification {
    pub fn entangled(&self) -> bool {
        self.witness.is_some()
    }
}

/// Layout, solve and witness extraction in one call.
pub fn certify(ds: &CorrelationDataset, opts: &CertifyOptions) -> Result<Certification> {
    opts.solver.validate()?;
    let basis = monomial_basis(ds.n_sites(), opts.level, &[])?;
    let scheme = match opts.scheme {
        SchemeChoice::Fixed(s) => s,
        SchemeChoice::Auto if opts.level == 1 => select_scheme(ds),
        SchemeChoice::Auto => SymmetryScheme::General,
    };
    let layout = build_layout(&basis, ds, scheme)?;
    let problem = assemble_primal(&layout);
    let solution = solve(&problem, &opts.solver);
    let witness = extract_witness(&solution, &problem, opts.threshold).ok();
    Ok(Certification {
        layout,
        problem,
        solution,
        witness,
    })
}
