use thiserror::Error;

use crate::corrdata::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("correlator {label} = {value} lies outside [-1, 1]")]
    ValueOutOfRange { label: String, value: f64 },

    #[error("bad key: {0}")]
    BadKey(String),

    #[error("noise level {0} outside [0, 1]")]
    BadNoiseLevel(f64),

    #[error("missing data: {}", format_labels(.0))]
    MissingData(Vec<Label>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("amplitudes not normalized: sum |phi|^2 = {0}")]
    NotNormalized(f64),

    #[error("system of {n} sites exceeds the exact-diagonalization cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("not a valid density matrix: {0}")]
    NotDensity(String),

    #[error("dataset does not match the {scheme} scheme: {reason}")]
    SchemeMismatch { scheme: String, reason: String },

    #[error("data are compatible with a separable state (lambda* = {0:e})")]
    NotEntangled(f64),

    #[error("bad size: {0}")]
    BadSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn format_labels(labels: &[Label]) -> String {
    let shown: Vec<String> = labels.iter().take(8).map(|l| l.to_string()).collect();
    if labels.len() > 8 {
        format!("{} (+{} more)", shown.join(", "), labels.len() - 8)
    } else {
        shown.join(", ")
    }
}
