//! Exact diagonalization of periodic spin-1/2 rings at finite temperature.
//!
//! Basis states are bitstrings with bit `i` set when site `i` has `Z = -1`.
//! The Hamiltonian is block-diagonalized by a conserved charge that is diagonal in
//! the working frame: total magnetization for Heisenberg, spin-flip parity for the
//! transverse-field Ising chain. The Ising chain is diagonalized in the
//! Hadamard-rotated frame where the field is diagonal; correlators are mapped back
//! with `X <-> Z`, `Y -> -Y`.

use faer::{Mat, Par, Side};

use crate::corrdata::{Axis, CorrelationDataset, Label};
use crate::error::{Error, Result};

pub const ED_MAX_SITES: usize = 14;

/// Temperatures below this floor are raised to it.
pub const MIN_TEMPERATURE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `H = (J/4) sum_i [X_i X_i+1 + Y_i Y_i+1 + Z_i Z_i+1]`
    Heisenberg,
    /// `H = -(J/4) sum_i [Z_i Z_i+1 + g X_i]`
    TransverseIsing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    /// Transverse field, ignored for Heisenberg.
    pub g: f64,
    pub j: f64,
}

impl ModelSpec {
    pub fn heisenberg(n: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Heisenberg,
            n,
            g: 0.0,
            j: 1.0,
        }
    }

    pub fn ising(n: usize, g: f64) -> Self {
        ModelSpec {
            kind: ModelKind::TransverseIsing,
            n,
            g,
            j: 1.0,
        }
    }

    /// Nearest-neighbour bonds of the ring; `n = 2` yields the same bond twice.
    fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).map(move |i| (i, (i + 1) % self.n))
    }

    fn charge(&self, b: u32) -> u32 {
        match self.kind {
            ModelKind::Heisenberg => b.count_ones(),
            ModelKind::TransverseIsing => b.count_ones() & 1,
        }
    }

    /// Axis and sign of a lab-frame Pauli in the working frame.
    fn to_frame(&self, axis: Axis) -> (Axis, f64) {
        match (self.kind, axis) {
            (ModelKind::Heisenberg, a) => (a, 1.0),
            (ModelKind::TransverseIsing, Axis::X) => (Axis::Z, 1.0),
            (ModelKind::TransverseIsing, Axis::Y) => (Axis::Y, -1.0),
            (ModelKind::TransverseIsing, Axis::Z) => (Axis::X, 1.0),
        }
    }

    /// Nonzero matrix elements `(target, value)` of `H` applied to basis state `b`.
    fn apply(&self, b: u32, out: &mut Vec<(u32, f64)>) {
        out.clear();
        let q = self.j / 4.0;
        let spin = |i: usize| if b >> i & 1 == 0 { 1.0 } else { -1.0 };
        let mut diag = 0.0;
        match self.kind {
            ModelKind::Heisenberg => {
                for (i, k) in self.bonds() {
                    diag += q * spin(i) * spin(k);
                    if spin(i) != spin(k) {
                        // (XX + YY)|01> = 2|10>
                        out.push((b ^ (1 << i) ^ (1 << k), 2.0 * q));
                    }
                }
            }
            ModelKind::TransverseIsing => {
                // Hadamard frame: -(J/4) sum [X_i X_i+1 + g Z_i]
                for (i, k) in self.bonds() {
                    out.push((b ^ (1 << i) ^ (1 << k), -q));
                }
                for i in 0..self.n {
                    diag -= q * self.g * spin(i);
                }
            }
        }
        out.push((b, diag));
    }
}

struct Sector {
    states: Vec<u32>,
    /// Density matrix restricted to the sector, in the order of `states`.
    rho: Mat<f64>,
}

/// Gibbs state `exp(-H/T)/Z` in block form.
pub struct ThermalState {
    spec: ModelSpec,
    sectors: Vec<Sector>,
    /// Basis state -> (sector, position).
    index: Vec<(u32, u32)>,
}

fn validate(spec: &ModelSpec, t: f64) -> Result<()> {
    if spec.n < 2 {
        return Err(Error::BadSize(format!("ring of {} sites; need at least 2", spec.n)));
    }
    if spec.n > ED_MAX_SITES {
        return Err(Error::TooLarge {
            n: spec.n,
            cap: ED_MAX_SITES,
        });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature {t} must be positive")));
    }
    if !spec.g.is_finite() || !spec.j.is_finite() {
        return Err(Error::InvalidParameter("non-finite coupling".into()));
    }
    Ok(())
}

/// Full-spectrum diagonalization of every symmetry sector and assembly of the Gibbs state.
pub fn thermal_state_ed(spec: &ModelSpec, t: f64) -> Result<ThermalState> {
    validate(spec, t)?;
    let t = t.max(MIN_TEMPERATURE);
    let dim = 1usize << spec.n;

    let mut by_charge: Vec<Vec<u32>> = vec![Vec::new(); spec.n + 1];
    for b in 0..dim as u32 {
        by_charge[spec.charge(b) as usize].push(b);
    }
    by_charge.retain(|s| !s.is_empty());

    let mut index = vec![(0u32, 0u32); dim];
    for (s, states) in by_charge.iter().enumerate() {
        for (p, &b) in states.iter().enumerate() {
            index[b as usize] = (s as u32, p as u32);
        }
    }

    let mut spectra = Vec::with_capacity(by_charge.len());
    let mut elements = Vec::new();
    for states in &by_charge {
        let d = states.len();
        let mut h = Mat::<f64>::zeros(d, d);
        for (col, &b) in states.iter().enumerate() {
            spec.apply(b, &mut elements);
            for &(target, v) in &elements {
                let row = index[target as usize].1 as usize;
                h[(row, col)] += v;
            }
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::InvalidParameter(format!("eigensolver failed: {e:?}")))?;
        let evals: Vec<f64> = (0..d).map(|i| eig.S().column_vector()[i]).collect();
        spectra.push((evals, eig.U().to_owned()));
    }

    let e0 = spectra
        .iter()
        .flat_map(|(e, _)| e.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let z: f64 = spectra
        .iter()
        .flat_map(|(e, _)| e.iter())
        .map(|e| (-(e - e0) / t).exp())
        .sum();

    let sectors = by_charge
        .into_iter()
        .zip(spectra)
        .map(|(states, (evals, u))| {
            let d = states.len();
            // rho = W W^T with W = U diag(sqrt p)
            let w = Mat::<f64>::from_fn(d, d, |r, c| u[(r, c)] * ((-(evals[c] - e0) / t).exp() / z).sqrt());
            let mut rho = Mat::<f64>::zeros(d, d);
            faer::linalg::matmul::matmul(
                rho.as_mut(),
                faer::Accum::Replace,
                w.as_ref(),
                w.transpose(),
                1.0,
                Par::Seq,
            );
            Sector { states, rho }
        })
        .collect();

    Ok(ThermalState {
        spec: *spec,
        sectors,
        index,
    })
}

impl ThermalState {
    pub fn n_sites(&self) -> usize {
        self.spec.n
    }

    /// `Tr[rho P]` for a product of lab-frame Paulis on distinct sites.
    pub fn expectation(&self, ops: &[(usize, Axis)]) -> f64 {
        let mut mask = 0u32;
        let mut sign = 1.0;
        let mut frame_ops = Vec::with_capacity(ops.len());
        for &(site, axis) in ops {
            let (a, s) = self.spec.to_frame(axis);
            sign *= s;
            frame_ops.push((site, a));
            if a != Axis::Z {
                mask |= 1 << site;
            }
        }
        let n_y = frame_ops.iter().filter(|(_, a)| *a == Axis::Y).count();
        if n_y % 2 == 1 {
            // rho is real, so an odd number of Y factors has a purely imaginary trace
            return 0.0;
        }
        let mut total = 0.0;
        for (sec_id, sector) in self.sectors.iter().enumerate() {
            for (col, &b) in sector.states.iter().enumerate() {
                let flipped = b ^ mask;
                let (s2, row) = self.index[flipped as usize];
                if s2 as usize != sec_id {
                    continue;
                }
                // <b| rho P |b> = rho[b, b^mask] * phase(b)
                let mut phase = 1.0;
                let mut y_seen = 0;
                for &(site, a) in &frame_ops {
                    let bit = b >> site & 1;
                    match a {
                        Axis::X => {}
                        Axis::Y => {
                            // Y|0> = i|1>, Y|1> = -i|0>
                            if bit == 1 {
                                phase = -phase;
                            }
                            y_seen += 1;
                        }
                        Axis::Z => {
                            if bit == 1 {
                                phase = -phase;
                            }
                        }
                    }
                }
                // i^(even count) = (-1)^(count/2)
                if (y_seen / 2) % 2 == 1 {
                    phase = -phase;
                }
                total += sector.rho[(col, row as usize)] * phase;
            }
        }
        sign * total
    }

    /// Every one-body and two-body correlator of the state.
    pub fn dataset(&self) -> Result<CorrelationDataset> {
        let n = self.spec.n;
        let clamp = |v: f64| v.clamp(-1.0, 1.0);
        let mut entries = Vec::with_capacity(3 * n + 9 * n * (n - 1) / 2);
        for i in 0..n {
            for a in Axis::ALL {
                entries.push((Label::one(i, a), clamp(self.expectation(&[(i, a)]))));
            }
            for j in i + 1..n {
                for a in Axis::ALL {
                    for b in Axis::ALL {
                        entries.push((Label::two(i, j, a, b), clamp(self.expectation(&[(i, a), (j, b)]))));
                    }
                }
            }
        }
        CorrelationDataset::new(n, entries)
    }
}

/// All one- and two-body correlators of the Gibbs state at temperature `t`.
pub fn thermal_dataset_ed(spec: &ModelSpec, t: f64) -> Result<CorrelationDataset> {
    thermal_state_ed(spec, t)?.dataset()
}
