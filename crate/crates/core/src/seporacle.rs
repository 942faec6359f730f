//! Explicit separable states and variational maximization over product states.
//!
//! Random states come from ChaCha8 seeded with a `u64`; restart `k` of a search
//! uses stream `k` of the same seed, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::corrdata::{Axis, CorrelationDataset, Label};
use crate::error::{Error, Result};
use crate::witnesslab::{Orientation, Witness};

const NORM_TOL: f64 = 1e-12;

/// One unit Bloch vector per site.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    bloch: Vec<[f64; 3]>,
}

impl ProductState {
    pub fn new(bloch: Vec<[f64; 3]>) -> Result<Self> {
        for (i, v) in bloch.iter().enumerate() {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!("Bloch vector of site {i} has norm {norm}")));
            }
        }
        Ok(ProductState { bloch })
    }

    /// Every site along `+axis` (or `-axis` when `negative`).
    pub fn polarized(n: usize, axis: Axis, negative: bool) -> Self {
        let mut v = [0.0; 3];
        v[axis.index()] = if negative { -1.0 } else { 1.0 };
        ProductState { bloch: vec![v; n] }
    }

    pub fn n_sites(&self) -> usize {
        self.bloch.len()
    }

    pub fn bloch(&self) -> &[[f64; 3]] {
        &self.bloch
    }

    /// Correlator of a label in this state.
    pub fn correlator(&self, label: &Label) -> f64 {
        match *label {
            Label::One { site, axis } => self.bloch[site][axis.index()],
            Label::Two { i, j, a, b } => self.bloch[i][a.index()] * self.bloch[j][b.index()],
        }
    }
}

/// Convex combination of product states.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableMixture {
    components: Vec<(f64, ProductState)>,
}

impl SeparableMixture {
    pub fn new(components: Vec<(f64, ProductState)>) -> Result<Self> {
        let Some(n) = components.first().map(|c| c.1.n_sites()) else {
            return Err(Error::InvalidParameter("empty mixture".into()));
        };
        if components.iter().any(|c| c.1.n_sites() != n) {
            return Err(Error::BadSize("mixture components differ in size".into()));
        }
        if components.iter().any(|c| !(c.0 >= 0.0)) {
            return Err(Error::InvalidParameter("negative mixture weight".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        Ok(SeparableMixture { components })
    }

    pub fn pure(state: ProductState) -> Self {
        SeparableMixture {
            components: vec![(1.0, state)],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.components[0].1.n_sites()
    }

    pub fn components(&self) -> &[(f64, ProductState)] {
        &self.components
    }
}

/// All one-body and all nine two-body correlators per pair.
pub fn dataset_of(mixture: &SeparableMixture) -> CorrelationDataset {
    let n = mixture.n_sites();
    let mut entries = Vec::with_capacity(3 * n + 9 * n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for a in Axis::ALL {
            entries.push(Label::one(i, a));
        }
        for j in i + 1..n {
            for a in Axis::ALL {
                for b in Axis::ALL {
                    entries.push(Label::two(i, j, a, b));
                }
            }
        }
    }
    let entries = entries.into_iter().map(|label| {
        let v: f64 = mixture.components.iter().map(|(p, s)| p * s.correlator(&label)).sum();
        // products of unit-vector components stay in [-1, 1] up to rounding
        (label, v.clamp(-1.0, 1.0))
    });
    CorrelationDataset::new(n, entries).expect("product-state correlators are valid")
}

/// Uniform point on the unit sphere: `z ~ U(-1, 1)`, azimuth `~ U(0, 2 pi)`.
pub fn random_bloch(rng: &mut impl Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

pub fn random_product_state_with(n: usize, rng: &mut impl Rng) -> ProductState {
    ProductState {
        bloch: (0..n).map(|_| random_bloch(rng)).collect(),
    }
}

pub fn random_product_state(n: usize, seed: u64) -> ProductState {
    random_product_state_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub seed: u64,
    /// Ascent steps per restart.
    pub max_steps: usize,
    /// Stop when the Riemannian gradient norm drops below this.
    pub grad_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            max_steps: 5000,
            grad_tol: 1e-10,
        }
    }
}

/// Steps between stall checks in a local ascent.
const STALL_WINDOW: usize = 100;

/// Default number of random restarts.
pub const DEFAULT_RESTARTS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Extremal witness value in the entangled direction: the maximum for
    /// `value <= bound` witnesses, the minimum for `value >= bound` ones.
    pub best_value: f64,
    pub best_state: ProductState,
    pub best_restart: usize,
    /// Restarts that met the gradient tolerance.
    pub converged: usize,
}

/// Witness as `f(v) = h.v + 1/2 v^T W v` over the stacked Bloch vectors, with `W`
/// stored by rows of nonzeros.
struct Objective {
    h: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Objective {
    fn new(witness: &Witness, n: usize, sign: f64) -> Self {
        let d = 3 * n;
        let mut h = vec![0.0; d];
        let mut w: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); d];
        for (label, &c) in &witness.coefficients {
            match *label {
                Label::One { site, axis } => h[3 * site + axis.index()] += sign * c,
                Label::Two { i, j, a, b } => {
                    let (p, q) = (3 * i + a.index(), 3 * j + b.index());
                    *w[p].entry(q).or_default() += sign * c;
                    *w[q].entry(p).or_default() += sign * c;
                }
            }
        }
        let rows = w.into_iter().map(|r| r.into_iter().filter(|e| e.1 != 0.0).collect()).collect();
        Objective { h, rows }
    }

    fn value_grad(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let mut f = 0.0;
        for (p, row) in self.rows.iter().enumerate() {
            let wv: f64 = row.iter().map(|&(q, c)| c * v[q]).sum();
            grad[p] = self.h[p] + wv;
            f += v[p] * (self.h[p] + 0.5 * wv);
        }
        f
    }
}

/// Tangent part of the gradient per site, returning its norm.
fn project_tangent(v: &[f64], grad: &[f64], out: &mut [f64]) -> f64 {
    let mut norm2 = 0.0;
    for (site_v, (site_g, site_o)) in v.chunks(3).zip(grad.chunks(3).zip(out.chunks_mut(3))) {
        let radial: f64 = site_v.iter().zip(site_g).map(|(a, b)| a * b).sum();
        for k in 0..3 {
            site_o[k] = site_g[k] - radial * site_v[k];
            norm2 += site_o[k] * site_o[k];
        }
    }
    norm2.sqrt()
}

fn retract(v: &[f64], dir: &[f64], step: f64, out: &mut [f64]) {
    for ((o, x), d) in out.chunks_mut(3).zip(v.chunks(3)).zip(dir.chunks(3)) {
        let y = [x[0] + step * d[0], x[1] + step * d[1], x[2] + step * d[2]];
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        for k in 0..3 {
            o[k] = y[k] / r;
        }
    }
}

/// Projected gradient ascent from `start`; the step doubles after an accepted
/// move and halves after a rejected one. A restart also counts as converged when
/// no step improves the value at floating-point resolution. Returns (value, state, converged).
fn ascend(obj: &Objective, start: Vec<f64>, opts: &SearchOptions) -> (f64, Vec<f64>, bool) {
    let d = start.len();
    let (mut v, mut trial) = (start, vec![0.0; d]);
    let (mut grad, mut tangent, mut scratch) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut f = obj.value_grad(&v, &mut grad);
    let mut step = 1.0;
    let mut checkpoint = f;
    for it in 0..opts.max_steps {
        if it > 0 && it % STALL_WINDOW == 0 {
            // progress below resolution: stop early, but do not claim convergence
            if f - checkpoint <= 1e-13 * f.abs().max(1.0) {
                break;
            }
            checkpoint = f;
        }
        let gnorm = project_tangent(&v, &grad, &mut tangent);
        if gnorm < opts.grad_tol {
            return (f, v, true);
        }
        loop {
            retract(&v, &tangent, step, &mut trial);
            let ft = obj.value_grad(&trial, &mut scratch);
            // sufficient increase; a bare `ft > f` accepts overshoots that gain almost nothing
            if ft - f >= 1e-4 * step * gnorm * gnorm {
                f = ft;
                std::mem::swap(&mut v, &mut trial);
                std::mem::swap(&mut grad, &mut scratch);
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no measurable ascent left at floating-point resolution
                return (f, v, true);
            }
        }
    }
    let converged = project_tangent(&v, &grad, &mut tangent) < opts.grad_tol;
    (f, v, converged)
}

/// Best product-state value of a witness over `restarts` local ascents.
///
/// Pure product states suffice: a linear functional attains its maximum over the
/// convex separable set at an extreme point.
pub fn max_over_product_states(witness: &Witness, n: usize, restarts: usize, opts: &SearchOptions) -> Result<SearchResult> {
    if witness.min_sites() > n {
        return Err(Error::BadSize(format!("witness needs {} sites, search has {n}", witness.min_sites())));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    let sign = match witness.orientation {
        Orientation::Upper => 1.0,
        Orientation::Lower => -1.0,
    };
    let obj = Objective::new(witness, n, sign);
    let runs: Vec<(f64, Vec<f64>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            let start: Vec<f64> = (0..n).flat_map(|_| random_bloch(&mut rng)).collect();
            ascend(&obj, start, opts)
        })
        .collect();
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 > runs[best].0 {
            best = k;
        }
    }
    let converged = runs.iter().filter(|r| r.2).count();
    let (f, v, _) = &runs[best];
    Ok(SearchResult {
        best_value: sign * f,
        best_state: ProductState {
            bloch: v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        },
        best_restart: best,
        converged,
    })
}
