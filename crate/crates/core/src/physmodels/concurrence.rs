//! Two-qubit reduced states of the single-excitation quench and their concurrence.
//!
//! Qubit order is (first site, second site) with basis `|00>, |01>, |10>, |11>`;
//! `|0>` is spin up (`Z = +1`).

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;

use super::QuenchAmplitudes;
use crate::error::{Error, Result};

/// Validated two-qubit density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitDensity(Matrix4<Complex64>);

impl TwoQubitDensity {
    /// Checks hermiticity and unit trace to 1e-12 and eigenvalues `>= -1e-10`.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        let herm_err = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > 1e-12 {
            return Err(Error::NotDensity(format!("not Hermitian (deviation {herm_err:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::NotDensity(format!("trace {tr} is not 1")));
        }
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(Error::NotDensity(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(TwoQubitDensity(m))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }
}

/// Reduced state of sites `i`, `j` (signed ring coordinates) of the single-excitation state,
/// mixed as `(1 - lambda) rho + lambda 1/4`.
pub fn pair_density_from_quench(amps: &QuenchAmplitudes, i: i64, j: i64, lambda: f64) -> Result<TwoQubitDensity> {
    let (si, sj) = (super::site_of(amps.n, i), super::site_of(amps.n, j));
    if si == sj {
        return Err(Error::BadKey(format!("pair ({i}, {j}) names a single site")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::BadNoiseLevel(lambda));
    }
    Ok(TwoQubitDensity(noisy_pair(amps.phi[si], amps.phi[sj], lambda)))
}

fn noisy_pair(a: Complex64, b: Complex64, lambda: f64) -> Matrix4<Complex64> {
    // excitation on the first site is |10>, on the second |01>, elsewhere |00>
    let v = [Complex64::new(0.0, 0.0), b, a, Complex64::new(0.0, 0.0)];
    let p00 = (1.0 - a.norm_sqr() - b.norm_sqr()).max(0.0);
    let mut rho = Matrix4::from_fn(|r, c| v[r] * v[c].conj());
    rho[(0, 0)] += p00;
    rho * Complex64::from(1.0 - lambda) + Matrix4::identity() * Complex64::from(lambda / 4.0)
}

/// `max(0, l1 - l2 - l3 - l4)` with `l_k` the decreasing square roots of the
/// eigenvalues of `rho (Y x Y) rho^* (Y x Y)`.
///
/// With `rho = W W^dag`, those square roots are the singular values of
/// `W^T (Y x Y) W`, which avoids square roots of nearly vanishing eigenvalues.
/// Eigenvalues of `rho` below `1e-13` of the largest are treated as zero.
pub fn wootters_concurrence(rho: &TwoQubitDensity) -> f64 {
    let eig = SymmetricEigen::new(*rho.matrix());
    let top = eig.eigenvalues.max();
    let kept: Vec<usize> = (0..4).filter(|&k| eig.eigenvalues[k] > 1e-13 * top).collect();
    let w = DMatrix::from_fn(4, kept.len(), |r, c| {
        eig.eigenvectors[(r, kept[c])] * Complex64::from(eig.eigenvalues[kept[c]].sqrt())
    });
    let yy = DMatrix::from_fn(4, 4, |r, c| yy()[(r, c)]);
    let tau = w.transpose() * yy * &w;
    let mut l: Vec<f64> = tau.singular_values().iter().copied().collect();
    l.resize(4, 0.0);
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

fn yy() -> Matrix4<Complex64> {
    // Y x Y = antidiagonal (-1, 1, 1, -1)
    let mut m = Matrix4::zeros();
    m[(0, 3)] = Complex64::from(-1.0);
    m[(1, 2)] = Complex64::from(1.0);
    m[(2, 1)] = Complex64::from(1.0);
    m[(3, 0)] = Complex64::from(-1.0);
    m
}

/// Largest white-noise fraction at which some pair of the quench state still has
/// nonzero concurrence.
pub fn concurrence_robustness(amps: &QuenchAmplitudes) -> f64 {
    let mut best = 0.0f64;
    for i in 0..amps.n {
        for j in i + 1..amps.n {
            let (a, b) = (amps.phi[i], amps.phi[j]);
            let entangled = |lambda: f64| wootters_concurrence(&TwoQubitDensity(noisy_pair(a, b, lambda))) > 1e-14;
            if !entangled(best) {
                continue;
            }
            let (mut lo, mut hi) = (best, 1.0);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if entangled(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = lo;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physmodels::quench_amplitudes;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::from(re)
    }

    fn projector(v: Vector4<Complex64>) -> Matrix4<Complex64> {
        v * v.adjoint()
    }

    #[test]
    fn reference_states() {
        let s = 1.0 / 2f64.sqrt();
        let singlet = TwoQubitDensity::new(projector(Vector4::new(c(0.0), c(s), c(-s), c(0.0)))).unwrap();
        assert_abs_diff_eq!(wootters_concurrence(&singlet), 1.0, epsilon = 1e-10);
        let mixed = TwoQubitDensity::new(Matrix4::identity() * c(0.25)).unwrap();
        assert_abs_diff_eq!(wootters_concurrence(&mixed), 0.0, epsilon = 1e-12);
        for lambda in [0.0, 0.3, 0.5, 0.6] {
            let w = TwoQubitDensity::new(singlet.matrix() * c(1.0 - lambda) + Matrix4::identity() * c(lambda / 4.0)).unwrap();
            let want = ((3.0 * (1.0 - lambda) - 1.0) / 2.0).max(0.0);
            assert_abs_diff_eq!(wootters_concurrence(&w), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_invalid_matrices() {
        let mut m = Matrix4::identity() * c(0.25);
        m[(0, 1)] = c(0.1);
        assert!(matches!(TwoQubitDensity::new(m), Err(Error::NotDensity(_))));
        assert!(matches!(TwoQubitDensity::new(Matrix4::identity() * c(0.3)), Err(Error::NotDensity(_))));
        let neg = Matrix4::from_diagonal(&Vector4::new(c(0.6), c(0.6), c(-0.1), c(-0.1)));
        assert!(matches!(TwoQubitDensity::new(neg), Err(Error::NotDensity(_))));
    }

    #[test]
    fn quench_pairs() {
        let amps = quench_amplitudes(8, 0.0).unwrap();
        let rho = pair_density_from_quench(&amps, 1, 2, 0.0).unwrap();
        let mut up = Matrix4::zeros();
        up[(0, 0)] = c(1.0);
        assert!((rho.matrix() - up).norm() < 1e-14);
        let noisy = pair_density_from_quench(&amps, 1, 2, 1.0).unwrap();
        assert!((noisy.matrix() - Matrix4::identity() * c(0.25)).norm() < 1e-14);
        assert!(matches!(pair_density_from_quench(&amps, 3, 11, 0.0), Err(Error::BadKey(_))));

        let amps = quench_amplitudes(64, 10.0).unwrap();
        let rho = TwoQubitDensity::new(pair_density_from_quench(&amps, -10, 10, 0.0).unwrap().matrix().clone()).unwrap();
        let want = 2.0 * amps.at(-10).norm() * amps.at(10).norm();
        assert_abs_diff_eq!(wootters_concurrence(&rho), want, epsilon = 1e-10);
    }

    #[test]
    fn quench_correlators_match_pair_state() {
        use crate::corrdata::Axis;
        use crate::physmodels::quench_dataset;
        let i = Complex64::new(0.0, 1.0);
        let pauli = |a: Axis| -> nalgebra::Matrix2<Complex64> {
            match a {
                Axis::X => nalgebra::Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0)),
                Axis::Y => nalgebra::Matrix2::new(c(0.0), -i, i, c(0.0)),
                Axis::Z => nalgebra::Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0)),
            }
        };
        let amps = quench_amplitudes(12, 2.5).unwrap();
        let ds = quench_dataset(&amps).unwrap();
        for (ri, rj) in [(0i64, 1i64), (-3, 2), (4, 6)] {
            let rho = pair_density_from_quench(&amps, ri, rj, 0.0).unwrap();
            let (si, sj) = (crate::physmodels::site_of(12, ri), crate::physmodels::site_of(12, rj));
            for a in Axis::ALL {
                let op = pauli(a).kronecker(&pauli(a));
                let v = (rho.matrix() * op).trace();
                assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(ds.two(si, sj, a, a).unwrap(), v.re, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn robustness_matches_x_state_formula() {
        // For this X state C > 0 iff (1-l)|ab| > sqrt(((1-l)p00 + l/4) l/4).
        let amps = quench_amplitudes(16, 3.0).unwrap();
        let mut best = 0.0f64;
        for i in 0..16 {
            for j in i + 1..16 {
                let (a, b) = (amps.phi[i].norm(), amps.phi[j].norm());
                let p00 = 1.0 - a * a - b * b;
                let f = |l: f64| (1.0 - l) * a * b - (((1.0 - l) * p00 + l / 4.0) * l / 4.0).sqrt();
                let (mut lo, mut hi) = (0.0, 1.0);
                if f(0.0) <= 0.0 {
                    continue;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                best = best.max(lo);
            }
        }
        assert_abs_diff_eq!(concurrence_robustness(&amps), best, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn product_states_have_zero_concurrence(
            t1 in 0.0f64..std::f64::consts::PI, p1 in 0.0f64..6.3,
            t2 in 0.0f64..std::f64::consts::PI, p2 in 0.0f64..6.3,
        ) {
            let ket = |t: f64, p: f64| [c((t / 2.0).cos()), Complex64::from_polar((t / 2.0).sin(), p)];
            let (u, v) = (ket(t1, p1), ket(t2, p2));
            let psi = Vector4::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]);
            let rho = TwoQubitDensity::new(projector(psi)).unwrap();
            prop_assert!(wootters_concurrence(&rho) <= 1e-10);
        }
    }
}
