//! Partial one- and two-body Pauli correlation data.
//!
//! A [`CorrelationDataset`] holds an arbitrary subset of the correlators
//! `C_i^a = Tr[rho P^a_i]` and `C_ij^ab = Tr[rho P^a_i P^b_j]` of an N-qubit state.
//! Absent entries are unknown, not zero. Two-body keys are stored with `i < j`;
//! a lookup of `(j, i, b, a)` resolves to the stored `(i, j, a, b)` entry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Current version tag written into every JSON document.
pub const FORMAT_VERSION: u32 = 1;

/// Pauli axis. The derived order `X < Y < Z` is the canonical key order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    fn from_symbol(c: char) -> Option<Axis> {
        match c {
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Key naming one correlator. Text form: `Z3` for `C_3^Z`, `X0Y5` for `C_{0,5}^{XY}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    One { site: usize, axis: Axis },
    /// Always canonical: `i < j`.
    Two { i: usize, j: usize, a: Axis, b: Axis },
}

impl Label {
    pub fn one(site: usize, axis: Axis) -> Label {
        Label::One { site, axis }
    }

    /// Two-body label, canonicalized so the lower site comes first.
    /// `i == j` produces a non-canonical label that datasets reject.
    pub fn two(i: usize, j: usize, a: Axis, b: Axis) -> Label {
        if i <= j {
            Label::Two { i, j, a, b }
        } else {
            Label::Two { i: j, j: i, a: b, b: a }
        }
    }

    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Label::One { site, .. } => vec![site],
            Label::Two { i, j, .. } => vec![i, j],
        }
    }

    pub fn max_site(&self) -> usize {
        match *self {
            Label::One { site, .. } => site,
            Label::Two { j, .. } => j,
        }
    }

    /// Number of `Y` factors acting on sites in `subset`.
    fn y_count_on(&self, subset: &[bool]) -> usize {
        let on = |s: usize, ax: Axis| (ax == Axis::Y && subset.get(s).copied().unwrap_or(false)) as usize;
        match *self {
            Label::One { site, axis } => on(site, axis),
            Label::Two { i, j, a, b } => on(i, a) + on(j, b),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Label::One { site, axis } => write!(f, "{axis}{site}"),
            Label::Two { i, j, a, b } => write!(f, "{a}{i}{b}{j}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        let bad = || Error::BadKey(format!("cannot parse correlator label {s:?}"));
        let mut factors = Vec::new();
        let mut chars = s.trim().chars().peekable();
        while let Some(c) = chars.next() {
            let axis = Axis::from_symbol(c).ok_or_else(bad)?;
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            let site: usize = digits.parse().map_err(|_| bad())?;
            factors.push((site, axis));
        }
        match factors.as_slice() {
            [(site, axis)] => Ok(Label::one(*site, *axis)),
            [(i, a), (j, b)] if i != j => Ok(Label::two(*i, *j, *a, *b)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Label, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Immutable set of measured correlators for `n_sites` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationDataset {
    n_sites: usize,
    values: BTreeMap<Label, f64>,
}

impl CorrelationDataset {
    pub fn new(n_sites: usize, entries: impl IntoIterator<Item = (Label, f64)>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::BadKey("a dataset needs at least one site".into()));
        }
        let mut values = BTreeMap::new();
        for (label, value) in entries {
            check_label(n_sites, &label)?;
            if !(value.abs() <= 1.0) {
                return Err(Error::ValueOutOfRange {
                    label: label.to_string(),
                    value,
                });
            }
            if values.insert(label, value).is_some() {
                return Err(Error::BadKey(format!("duplicate correlator {label}")));
            }
        }
        Ok(CorrelationDataset { n_sites, values })
    }

    /// Empty dataset on `n_sites` qubits.
    pub fn empty(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, std::iter::empty())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: &Label) -> Option<f64> {
        // Labels built by hand may be non-canonical; route through the constructor.
        let key = match *label {
            Label::Two { i, j, a, b } => Label::two(i, j, a, b),
            one => one,
        };
        self.values.get(&key).copied()
    }

    pub fn one(&self, site: usize, axis: Axis) -> Option<f64> {
        self.values.get(&Label::one(site, axis)).copied()
    }

    /// Two-body lookup in either site order.
    pub fn two(&self, i: usize, j: usize, a: Axis, b: Axis) -> Option<f64> {
        if i == j {
            return None;
        }
        self.values.get(&Label::two(i, j, a, b)).copied()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.get(label).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, f64)> + '_ {
        self.values.iter().map(|(l, v)| (*l, *v))
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.values.keys().copied()
    }

    pub fn one_body(&self) -> impl Iterator<Item = (usize, Axis, f64)> + '_ {
        self.iter().filter_map(|(l, v)| match l {
            Label::One { site, axis } => Some((site, axis, v)),
            Label::Two { .. } => None,
        })
    }

    pub fn two_body(&self) -> impl Iterator<Item = (usize, usize, Axis, Axis, f64)> + '_ {
        self.iter().filter_map(|(l, v)| match l {
            Label::Two { i, j, a, b } => Some((i, j, a, b, v)),
            Label::One { .. } => None,
        })
    }

    /// Keeps only the entries accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Label, f64) -> bool) -> Self {
        CorrelationDataset {
            n_sites: self.n_sites,
            values: self.values.iter().filter(|(l, v)| keep(l, **v)).map(|(l, v)| (*l, *v)).collect(),
        }
    }

    /// White-noise admixture: every correlator is multiplied by `1 - lambda`.
    pub fn scale_noise(&self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::BadNoiseLevel(lambda));
        }
        let keep = 1.0 - lambda;
        Ok(CorrelationDataset {
            n_sites: self.n_sites,
            values: self.values.iter().map(|(l, v)| (*l, keep * v)).collect(),
        })
    }

    /// Partial transposition on `subset`: correlators with an odd number of `Y`
    /// factors on the subset change sign.
    pub fn partial_transpose(&self, subset: &[usize]) -> Result<Self> {
        let mut mask = vec![false; self.n_sites];
        for &s in subset {
            if s >= self.n_sites {
                return Err(Error::BadKey(format!("site {s} outside [0, {})", self.n_sites)));
            }
            mask[s] = true;
        }
        let values = self
            .values
            .iter()
            .map(|(l, v)| {
                let flipped = if l.y_count_on(&mask) % 2 == 1 { -v } else { *v };
                (*l, flipped)
            })
            .collect();
        Ok(CorrelationDataset {
            n_sites: self.n_sites,
            values,
        })
    }

    /// Permutation-averaged first and same-axis second moments.
    pub fn collective_moments(&self) -> Result<CollectiveMoments> {
        let n = self.n_sites;
        if n < 2 {
            return Err(Error::BadSize("collective moments need at least two sites".into()));
        }
        let mut missing = Vec::new();
        let mut m = [0.0; 3];
        let mut c = [0.0; 3];
        for axis in Axis::ALL {
            for i in 0..n {
                match self.one(i, axis) {
                    Some(v) => m[axis.index()] += v,
                    None => missing.push(Label::one(i, axis)),
                }
                for j in i + 1..n {
                    match self.two(i, j, axis, axis) {
                        Some(v) => c[axis.index()] += v,
                        None => missing.push(Label::two(i, j, axis, axis)),
                    }
                }
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(Error::MissingData(missing));
        }
        let pairs = (n * (n - 1) / 2) as f64;
        for a in 0..3 {
            m[a] /= n as f64;
            c[a] /= pairs;
        }
        Ok(CollectiveMoments { n_sites: n, m, c })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = DatasetDocument::from(self);
        let mut text = serde_json::to_string_pretty(&doc).expect("dataset serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DatasetDocument::from(self)).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DatasetDocument = serde_json::from_str(text).map_err(parse_error)?;
        doc.into_dataset()
    }
}

fn check_label(n_sites: usize, label: &Label) -> Result<()> {
    match *label {
        Label::One { site, .. } if site >= n_sites => {
            Err(Error::BadKey(format!("{label}: site {site} outside [0, {n_sites})")))
        }
        Label::Two { i, j, .. } if i == j => Err(Error::BadKey(format!("{label}: two-body key on a single site"))),
        Label::Two { i, j, .. } if i > j => Err(Error::BadKey(format!("{label}: non-canonical two-body key"))),
        Label::Two { j, .. } if j >= n_sites => {
            Err(Error::BadKey(format!("{label}: site {j} outside [0, {n_sites})")))
        }
        _ => Ok(()),
    }
}

pub(crate) fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Permutation-averaged moments `m_a = N^-1 sum_i C_i^a` and
/// `C_aa = [N(N-1)]^-1 sum_{i != j} C_ij^aa`, indexed by [`Axis::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectiveMoments {
    pub n_sites: usize,
    pub m: [f64; 3],
    pub c: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct OneBodyRecord {
    i: usize,
    axis: Axis,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TwoBodyRecord {
    i: usize,
    j: usize,
    axis_i: Axis,
    axis_j: Axis,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct DatasetDocument {
    #[serde(default = "default_version")]
    format_version: u32,
    n_sites: usize,
    #[serde(default)]
    one_body: Vec<OneBodyRecord>,
    #[serde(default)]
    two_body: Vec<TwoBodyRecord>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

impl From<&CorrelationDataset> for DatasetDocument {
    fn from(ds: &CorrelationDataset) -> Self {
        DatasetDocument {
            format_version: FORMAT_VERSION,
            n_sites: ds.n_sites,
            one_body: ds.one_body().map(|(i, axis, value)| OneBodyRecord { i, axis, value }).collect(),
            two_body: ds
                .two_body()
                .map(|(i, j, axis_i, axis_j, value)| TwoBodyRecord {
                    i,
                    j,
                    axis_i,
                    axis_j,
                    value,
                })
                .collect(),
        }
    }
}

impl DatasetDocument {
    fn into_dataset(self) -> Result<CorrelationDataset> {
        if self.format_version > FORMAT_VERSION {
            return Err(field_error("format_version", format!("unsupported version {}", self.format_version)));
        }
        let mut entries = Vec::with_capacity(self.one_body.len() + self.two_body.len());
        for (k, r) in self.one_body.iter().enumerate() {
            entries.push((format!("one_body[{k}]"), Label::one(r.i, r.axis), r.value));
        }
        for (k, r) in self.two_body.iter().enumerate() {
            if r.i == r.j {
                return Err(field_error(&format!("two_body[{k}]"), "i and j must differ".into()));
            }
            entries.push((format!("two_body[{k}]"), Label::two(r.i, r.j, r.axis_i, r.axis_j), r.value));
        }
        // Validate entry by entry so the diagnostic names the offending record.
        let mut values = BTreeMap::new();
        for (field, label, value) in entries {
            CorrelationDataset::new(self.n_sites, [(label, value)]).map_err(|e| field_error(&field, e.to_string()))?;
            if values.insert(label, value).is_some() {
                return Err(field_error(&field, format!("duplicate correlator {label}")));
            }
        }
        CorrelationDataset::new(self.n_sites, values)
    }
}

fn field_error(field: &str, message: String) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message: format!("{field}: {message}"),
    }
}
