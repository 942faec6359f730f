//! Dataset generators for the benchmark scenarios, plus structure factors and
//! two-qubit concurrence diagnostics.

mod concurrence;
mod ed;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::corrdata::{Axis, CorrelationDataset, Label};
use crate::error::{Error, Result};

pub use concurrence::{concurrence_robustness, pair_density_from_quench, wootters_concurrence, TwoQubitDensity};
pub use ed::{thermal_dataset_ed, thermal_state_ed, ModelKind, ModelSpec, ThermalState, ED_MAX_SITES, MIN_TEMPERATURE};

/// Singlet pair mixed with white noise: `C_01^ab = -(1 - lambda) delta_ab`, no one-body terms.
pub fn werner_dataset(lambda: f64) -> Result<CorrelationDataset> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::BadNoiseLevel(lambda));
    }
    let v = -(1.0 - lambda);
    let mut entries = Vec::with_capacity(9);
    for a in Axis::ALL {
        entries.push((Label::one(0, a), 0.0));
        entries.push((Label::one(1, a), 0.0));
        entries.push((Label::two(0, 1, a, a), v));
    }
    CorrelationDataset::new(2, entries)
}

/// Single-excitation amplitudes on a ring of `n` sites after a quench from one flipped spin.
///
/// `phi[s]` is the amplitude on site `s`; the flip sits on site 0 and site `s` has
/// signed ring coordinate [`signed_coordinate`]`(n, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchAmplitudes {
    pub n: usize,
    pub t: f64,
    pub phi: Vec<Complex64>,
}

impl QuenchAmplitudes {
    /// Amplitude at signed ring coordinate `r`.
    pub fn at(&self, r: i64) -> Complex64 {
        self.phi[site_of(self.n, r)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.phi.iter().map(|p| p.norm_sqr()).sum()
    }
}

/// Ring coordinate `r` in `(-n/2, n/2]` of site `s`.
pub fn signed_coordinate(n: usize, s: usize) -> i64 {
    let (n, s) = (n as i64, s as i64);
    if 2 * s > n {
        s - n
    } else {
        s
    }
}

/// Site index in `[0, n)` for ring coordinate `r`.
pub fn site_of(n: usize, r: i64) -> usize {
    r.rem_euclid(n as i64) as usize
}

/// `phi_r(t) = N^-1 sum_k exp[2 i pi k r / N + i t cos(2 pi k / N)]`, evaluated as an inverse FFT.
pub fn quench_amplitudes(n: usize, t: f64) -> Result<QuenchAmplitudes> {
    if n < 2 {
        return Err(Error::BadSize(format!("ring of {n} sites; need at least 2")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time {t} must be finite and non-negative")));
    }
    let mut phi: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, t * (2.0 * PI * k as f64 / n as f64).cos()))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut phi);
    let inv = 1.0 / n as f64;
    for p in &mut phi {
        *p *= inv;
    }
    Ok(QuenchAmplitudes { n, t, phi })
}

/// Correlators of the single-excitation state:
/// `C_i^Z = 1 - 2|phi_i|^2`, `C_ij^ZZ = 1 - 2(|phi_i|^2 + |phi_j|^2)` and
/// `C_ij^XX = C_ij^YY = 2 Re(phi_i^* phi_j)`, so that `(C^XX + C^YY)/2 = 2 Re(phi_i^* phi_j)`.
pub fn quench_dataset(amps: &QuenchAmplitudes) -> Result<CorrelationDataset> {
    let norm = amps.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 || amps.phi.len() != amps.n {
        return Err(Error::NotNormalized(norm));
    }
    let n = amps.n;
    let p2: Vec<f64> = amps.phi.iter().map(|p| p.norm_sqr()).collect();
    let clamp = |v: f64| v.clamp(-1.0, 1.0);
    let mut entries = Vec::with_capacity(n + 3 * n * (n - 1) / 2);
    for i in 0..n {
        entries.push((Label::one(i, Axis::Z), clamp(1.0 - 2.0 * p2[i])));
        for j in i + 1..n {
            let perp = clamp(2.0 * (amps.phi[i].conj() * amps.phi[j]).re);
            entries.push((Label::two(i, j, Axis::X, Axis::X), perp));
            entries.push((Label::two(i, j, Axis::Y, Axis::Y), perp));
            entries.push((Label::two(i, j, Axis::Z, Axis::Z), clamp(1.0 - 2.0 * (p2[i] + p2[j]))));
        }
    }
    CorrelationDataset::new(n, entries)
}

/// One structure-factor evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureFactorValue<const D: usize> {
    pub k: [f64; D],
    pub axis: Axis,
    pub value: f64,
}

/// `S_k^a = N^-1 sum_{j,j'} cos(k.(r_j' - r_j)) C_jj'^aa` with `C_jj^aa = 1`.
pub fn structure_factor<const D: usize>(
    ds: &CorrelationDataset,
    k: [f64; D],
    axis: Axis,
    positions: &[[f64; D]],
) -> Result<StructureFactorValue<D>> {
    let n = ds.n_sites();
    if positions.len() != n {
        return Err(Error::BadSize(format!("{} positions for {n} sites", positions.len())));
    }
    let mut missing = Vec::new();
    let mut sum = n as f64;
    for j in 0..n {
        for jp in j + 1..n {
            match ds.two(j, jp, axis, axis) {
                Some(c) => {
                    let phase: f64 = (0..D).map(|d| k[d] * (positions[jp][d] - positions[j][d])).sum();
                    sum += 2.0 * phase.cos() * c;
                }
                None => missing.push(Label::two(j, jp, axis, axis)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }
    Ok(StructureFactorValue {
        k,
        axis,
        value: sum / n as f64,
    })
}

/// Sites `0..n` on a line.
pub fn chain_positions(n: usize) -> Vec<[f64; 1]> {
    (0..n).map(|i| [i as f64]).collect()
}

/// Commensurate chain wavevectors `2 pi m / n`, `m = 0..n`.
pub fn commensurate_grid(n: usize) -> Vec<f64> {
    (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
}

/// Per-axis minimizers of the chain structure factor and the summed minimum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalStructureWitness {
    /// Argmin wavevector per axis, indexed by [`Axis::index`]; first grid point wins ties.
    pub k: [f64; 3],
    pub per_axis: [f64; 3],
    pub value: f64,
}

impl OptimalStructureWitness {
    /// Separable qubit states satisfy `value >= 2`.
    pub fn entangled(&self) -> bool {
        self.value < 2.0 - 1e-9
    }
}

pub fn optimal_structure_witness(ds: &CorrelationDataset, k_grid: &[f64]) -> Result<OptimalStructureWitness> {
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty wavevector grid".into()));
    }
    let pos = chain_positions(ds.n_sites());
    let mut k = [0.0; 3];
    let mut per_axis = [f64::INFINITY; 3];
    for axis in Axis::ALL {
        for &kk in k_grid {
            let s = structure_factor(ds, [kk], axis, &pos)?.value;
            if s < per_axis[axis.index()] {
                per_axis[axis.index()] = s;
                k[axis.index()] = kk;
            }
        }
    }
    Ok(OptimalStructureWitness {
        k,
        per_axis,
        value: per_axis.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_up(n: usize) -> CorrelationDataset {
        let mut e = Vec::new();
        for a in Axis::ALL {
            let v = if a == Axis::Z { 1.0 } else { 0.0 };
            for i in 0..n {
                e.push((Label::one(i, a), v));
                for j in i + 1..n {
                    e.push((Label::two(i, j, a, a), v));
                }
            }
        }
        CorrelationDataset::new(n, e).unwrap()
    }

    #[test]
    fn werner_cases() {
        let c = |ds: &CorrelationDataset| Axis::ALL.iter().map(|&a| ds.two(0, 1, a, a).unwrap()).sum::<f64>();
        assert_eq!(c(&werner_dataset(0.0).unwrap()), -3.0);
        assert!(werner_dataset(1.0).unwrap().iter().all(|(_, v)| v == 0.0));
        assert_abs_diff_eq!(c(&werner_dataset(2.0 / 3.0).unwrap()), -1.0, epsilon = 1e-15);
        assert!(matches!(werner_dataset(1.1), Err(Error::BadNoiseLevel(_))));
    }

    #[test]
    fn coordinates() {
        assert_eq!(signed_coordinate(64, 0), 0);
        assert_eq!(signed_coordinate(64, 32), 32);
        assert_eq!(signed_coordinate(64, 33), -31);
        assert_eq!(site_of(64, -10), 54);
        for s in 0..9 {
            assert_eq!(site_of(9, signed_coordinate(9, s)), s);
        }
    }

    #[test]
    fn quench_at_time_zero() {
        let amps = quench_amplitudes(64, 0.0).unwrap();
        for (s, p) in amps.phi.iter().enumerate() {
            let want = if s == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(p.re, want, epsilon = 1e-15);
            assert_abs_diff_eq!(p.im, 0.0, epsilon = 1e-15);
        }
        let ds = quench_dataset(&amps).unwrap();
        assert_abs_diff_eq!(ds.one(0, Axis::Z).unwrap(), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ds.one(5, Axis::Z).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ds.two(3, 7, Axis::Z, Axis::Z).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ds.two(0, 7, Axis::Z, Axis::Z).unwrap(), -1.0, epsilon = 1e-14);
    }

    /// Neumaier-compensated direct evaluation of the defining sum.
    fn phi_direct(n: usize, t: f64, r: i64) -> Complex64 {
        let (mut re, mut im, mut cre, mut cim) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let add = |s: &mut f64, c: &mut f64, x: f64| {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        };
        for k in 0..n {
            let theta = 2.0 * PI * (k as f64) * (r as f64) / n as f64 + t * (2.0 * PI * k as f64 / n as f64).cos();
            add(&mut re, &mut cre, theta.cos());
            add(&mut im, &mut cim, theta.sin());
        }
        Complex64::new(re + cre, im + cim) / n as f64
    }

    #[test]
    fn quench_matches_direct_sum() {
        let amps = quench_amplitudes(8, 1.0).unwrap();
        for s in 0..8 {
            let d = phi_direct(8, 1.0, signed_coordinate(8, s));
            assert!((amps.phi[s] - d).norm() < 1e-14, "site {s}");
        }
        let amps = quench_amplitudes(64, 10.0).unwrap();
        for r in [-31i64, -10, 0, 10, 32] {
            assert!((amps.at(r) - phi_direct(64, 10.0, r)).norm() < 1e-13);
        }
        assert_abs_diff_eq!(amps.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quench_rejects_unnormalized() {
        let mut amps = quench_amplitudes(8, 1.0).unwrap();
        amps.phi[0] *= 1.1;
        assert!(matches!(quench_dataset(&amps), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn structure_factor_cases() {
        let up = all_up(6);
        let pos = chain_positions(6);
        assert_abs_diff_eq!(structure_factor(&up, [0.0], Axis::Z, &pos).unwrap().value, 6.0, epsilon = 1e-12);
        for m in 1..6 {
            let k = 2.0 * PI * m as f64 / 6.0;
            assert_abs_diff_eq!(structure_factor(&up, [k], Axis::X, &pos).unwrap().value, 1.0, epsilon = 1e-12);
        }
        let singlet = werner_dataset(0.0).unwrap();
        let s = structure_factor(&singlet, [PI], Axis::Z, &chain_positions(2)).unwrap();
        assert_abs_diff_eq!(s.value, 2.0, epsilon = 1e-12);
        let partial = CorrelationDataset::new(3, [(Label::two(0, 1, Axis::Z, Axis::Z), 0.2)]).unwrap();
        assert!(matches!(
            structure_factor(&partial, [0.0], Axis::Z, &chain_positions(3)),
            Err(Error::MissingData(m)) if m.len() == 2
        ));
    }

    #[test]
    fn structure_factor_on_a_square_lattice() {
        let up = all_up(4);
        let pos = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_abs_diff_eq!(structure_factor(&up, [0.0, 0.0], Axis::Z, &pos).unwrap().value, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(structure_factor(&up, [PI, 0.0], Axis::Z, &pos).unwrap().value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn optimal_structure_witness_cases() {
        let n = 6;
        let w = optimal_structure_witness(&all_up(n), &commensurate_grid(n)).unwrap();
        assert_abs_diff_eq!(w.value, 2.0, epsilon = 1e-12);
        assert!(!w.entangled());
        let w = optimal_structure_witness(&werner_dataset(0.0).unwrap(), &[0.0, PI]).unwrap();
        assert_abs_diff_eq!(w.value, 0.0, epsilon = 1e-12);
        assert_eq!(w.k, [0.0; 3]);
        assert!(w.entangled());
    }

    proptest! {
        #[test]
        fn quench_normalization_and_sum_rule(n in 2usize..=256, t in 0.0f64..=50.0) {
            let amps = quench_amplitudes(n, t).unwrap();
            prop_assert!((amps.norm_sqr() - 1.0).abs() <= 1e-12);
            if n <= 40 {
                let ds = quench_dataset(&amps).unwrap();
                let flips: f64 = (0..n).map(|i| (1.0 - ds.one(i, Axis::Z).unwrap()) / 2.0).sum();
                prop_assert!((flips - 1.0).abs() <= 1e-10);
            }
        }
    }
}
