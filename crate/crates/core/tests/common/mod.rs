//! Quantum-state fixtures built from dense Pauli strings.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sepcert::seporacle::{dataset_of, random_product_state_with, SeparableMixture};
use sepcert::{Axis, CorrelationDataset, Label};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn pauli(a: Axis) -> DMatrix<Complex64> {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match a {
        Axis::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Pauli string on `n` qubits; site 0 is the most significant factor.
pub fn pauli_string(n: usize, factors: &[(usize, Axis)]) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for site in 0..n {
        let mut local = DMatrix::identity(2, 2);
        for &(s, a) in factors {
            if s == site {
                local = local * pauli(a);
            }
        }
        m = m.kronecker(&local);
    }
    m
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

/// `G G^dag / tr` for a complex Gaussian `2^n x rank` matrix `G`.
pub fn random_density(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let d = 1 << n;
    let g = DMatrix::from_fn(d, rank, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Every one-body and two-body correlator of `rho`.
pub fn quantum_dataset(n: usize, rho: &DMatrix<Complex64>) -> CorrelationDataset {
    let mut entries = Vec::new();
    for i in 0..n {
        for a in Axis::ALL {
            entries.push((Label::one(i, a), vec![(i, a)]));
        }
        for j in i + 1..n {
            for a in Axis::ALL {
                for b in Axis::ALL {
                    entries.push((Label::two(i, j, a, b), vec![(i, a), (j, b)]));
                }
            }
        }
    }
    let values = entries.into_iter().map(|(label, f)| {
        let v = (rho * pauli_string(n, &f)).trace().re;
        (label, v.clamp(-1.0, 1.0))
    });
    CorrelationDataset::new(n, values).unwrap()
}

/// Random `n`-qubit state of the given rank, full correlator set.
pub fn random_quantum_dataset(n: usize, rank: usize, rng: &mut impl Rng) -> CorrelationDataset {
    quantum_dataset(n, &random_density(n, rank, rng))
}

/// Random separable mixture of `k` product states, full correlator set.
pub fn random_separable_dataset(n: usize, k: usize, rng: &mut impl Rng) -> CorrelationDataset {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut comps: Vec<(f64, _)> = raw.iter().map(|w| (w / total, random_product_state_with(n, rng))).collect();
    // absorb the rounding of the normalization into the last weight
    let s: f64 = comps[..k - 1].iter().map(|c| c.0).sum();
    comps[k - 1].0 = 1.0 - s;
    dataset_of(&SeparableMixture::new(comps).unwrap())
}

/// Frozen regression constant and its tolerance from `tests/fixtures/regression.json`.
pub fn regression(name: &str) -> (f64, f64) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/regression.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["format_version"], 1);
    let entry = &doc["constants"][name];
    (entry["value"].as_f64().unwrap(), entry["tolerance"].as_f64().unwrap())
}
