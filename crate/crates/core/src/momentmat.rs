//! Moment-matrix layouts for the separability relaxation.
//!
//! A product state is a point `(x_i, y_i, z_i)` on a sphere per site; a separable
//! state is a probability distribution over such points. For a monomial basis
//! `m_0 = 1, m_1, ...` the matrix `Gamma_ab = <m_a m_b>` is PSD for every
//! distribution. The layout records, entry by entry, whether `Gamma_ab` is fixed
//! by the data, a constant, forced to zero, or a free moment, together with the
//! sphere constraints `x_i^2 + y_i^2 + z_i^2 = 1` as linear equations on entries.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corrdata::{Axis, CorrelationDataset, Label};
use crate::error::{Error, Result};

/// Values with magnitude at or below this count as zero when matching dataset shapes.
pub const SHAPE_TOL: f64 = 1e-12;

/// Product of classical Bloch components, stored as a sorted multiset of `(site, axis)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<(usize, Axis)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn new(mut factors: Vec<(usize, Axis)>) -> Self {
        factors.sort();
        Monomial(factors)
    }

    pub fn var(site: usize, axis: Axis) -> Self {
        Monomial(vec![(site, axis)])
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut f = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) if x <= y => f.push(*a.next().unwrap()),
                (Some(_), Some(_)) => f.push(*b.next().unwrap()),
                (Some(_), None) => f.push(*a.next().unwrap()),
                (None, Some(_)) => f.push(*b.next().unwrap()),
                (None, None) => break,
            }
        }
        Monomial(f)
    }

    /// Correlator measured by this moment: `a_i` or `a_i b_j` with `i != j`.
    pub fn data_label(&self) -> Option<Label> {
        match self.0.as_slice() {
            [(i, a)] => Some(Label::one(*i, *a)),
            [(i, a), (j, b)] if i != j => Some(Label::two(*i, *j, *a, *b)),
            _ => None,
        }
    }

    /// First site carrying `z^2` or a higher power of `z`.
    pub fn z_squared_site(&self) -> Option<usize> {
        self.0
            .windows(2)
            .find(|w| w[0] == w[1] && w[0].1 == Axis::Z)
            .map(|w| w[0].0)
    }

    /// This monomial with one factor `(site, axis)` removed, if present.
    fn without(&self, site: usize, axis: Axis) -> Option<Monomial> {
        let pos = self.0.iter().position(|&f| f == (site, axis))?;
        let mut f = self.0.clone();
        f.remove(pos);
        Some(Monomial(f))
    }

    fn max_site(&self) -> Option<usize> {
        self.0.last().map(|f| f.0)
    }
}

/// Graded, then lexicographic by `(site, axis)`.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (site, axis)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{}{site}", axis.symbol().to_ascii_lowercase())?;
        }
        Ok(())
    }
}

/// Ordered monomial basis `v^(level)` plus optional extra monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    pub n_sites: usize,
    pub level: usize,
    pub monomials: Vec<Monomial>,
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    fn is_plain_level_one(&self) -> bool {
        self.level == 1 && self.monomials.len() == 3 * self.n_sites + 1
    }
}

/// All monomials of degree `<= level` in graded order, then `extras` (deduplicated).
pub fn monomial_basis(n_sites: usize, level: usize, extras: &[Monomial]) -> Result<MonomialBasis> {
    if n_sites == 0 || level == 0 {
        return Err(Error::InvalidParameter("basis needs n_sites >= 1 and level >= 1".into()));
    }
    let vars: Vec<(usize, Axis)> = (0..n_sites).flat_map(|i| Axis::ALL.map(|a| (i, a))).collect();
    let mut monomials = vec![Monomial::one()];
    let mut layer: Vec<(Vec<(usize, Axis)>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..level {
        let mut next = Vec::new();
        for (f, start) in &layer {
            for (v, var) in vars.iter().enumerate().skip(*start) {
                let mut g = f.clone();
                g.push(*var);
                next.push((g, v));
            }
        }
        monomials.extend(next.iter().map(|(f, _)| Monomial(f.clone())));
        layer = next;
    }
    for m in extras {
        if m.degree() <= level {
            return Err(Error::InvalidParameter(format!("extra monomial {m} has degree <= level {level}")));
        }
        if m.max_site().is_some_and(|s| s >= n_sites) {
            return Err(Error::BadKey(format!("extra monomial {m} references a site outside [0, {n_sites})")));
        }
        if !monomials.contains(m) {
            monomials.push(m.clone());
        }
    }
    Ok(MonomialBasis {
        n_sites,
        level,
        monomials,
    })
}

/// Symmetrization of the unknown distribution, chosen from the shape of the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryScheme {
    General,
    /// One-body data only along the axis; same-axis two-body data only.
    AxisDiagonal(Axis),
    /// As `AxisDiagonal`, with the two transverse correlators entering only through their average.
    TransverseSymmetric(Axis),
    /// Only `c_ij = C^XX + C^YY + C^ZZ` enters.
    RotationInvariant,
}

impl fmt::Display for SymmetryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryScheme::General => write!(f, "general"),
            SymmetryScheme::AxisDiagonal(a) => write!(f, "axis-diagonal({a})"),
            SymmetryScheme::TransverseSymmetric(a) => write!(f, "transverse-symmetric({a})"),
            SymmetryScheme::RotationInvariant => write!(f, "rotation-invariant"),
        }
    }
}

impl SymmetryScheme {
    /// Distinguished axis for an explicitly requested axis-type scheme: the axis
    /// carrying nonzero one-body data, else `Z`.
    pub fn infer_axis(ds: &CorrelationDataset) -> Axis {
        Axis::ALL
            .into_iter()
            .find(|&a| ds.one_body().any(|(_, ax, v)| ax == a && v.abs() > SHAPE_TOL))
            .unwrap_or(Axis::Z)
    }
}

fn transverse(d: Axis) -> (Axis, Axis) {
    match d {
        Axis::X => (Axis::Y, Axis::Z),
        Axis::Y => (Axis::X, Axis::Z),
        Axis::Z => (Axis::X, Axis::Y),
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= SHAPE_TOL
}

/// Structural requirements of `scheme`; `exact` additionally demands equal averaged entries.
fn shape_violation(ds: &CorrelationDataset, scheme: SymmetryScheme, exact: bool) -> Option<String> {
    let cross = ds.two_body().find(|&(_, _, a, b, v)| a != b && v.abs() > SHAPE_TOL);
    if scheme != SymmetryScheme::General {
        if let Some((i, j, a, b, v)) = cross {
            return Some(format!("cross-axis correlator {} = {v}", Label::two(i, j, a, b)));
        }
    }
    let pairs = || (0..ds.n_sites()).flat_map(move |i| (i + 1..ds.n_sites()).map(move |j| (i, j)));
    match scheme {
        SymmetryScheme::General => None,
        SymmetryScheme::AxisDiagonal(d) | SymmetryScheme::TransverseSymmetric(d) => {
            if let Some((i, a, v)) = ds.one_body().find(|&(_, a, v)| a != d && v.abs() > SHAPE_TOL) {
                return Some(format!("one-body correlator {} = {v} off the {d} axis", Label::one(i, a)));
            }
            if let SymmetryScheme::TransverseSymmetric(_) = scheme {
                let (t1, t2) = transverse(d);
                for (i, j) in pairs() {
                    match (ds.two(i, j, t1, t1), ds.two(i, j, t2, t2)) {
                        (Some(u), Some(w)) if exact && !near(u, w) => {
                            return Some(format!("pair ({i}, {j}): {t1}{t1} = {u} differs from {t2}{t2} = {w}"));
                        }
                        (Some(_), None) | (None, Some(_)) => {
                            return Some(format!("pair ({i}, {j}) has only one of {t1}{t1}, {t2}{t2}"));
                        }
                        _ => {}
                    }
                }
            }
            None
        }
        SymmetryScheme::RotationInvariant => {
            if let Some((i, a, v)) = ds.one_body().find(|&(_, _, v)| v.abs() > SHAPE_TOL) {
                return Some(format!("one-body correlator {} = {v}", Label::one(i, a)));
            }
            for (i, j) in pairs() {
                let vals = Axis::ALL.map(|a| ds.two(i, j, a, a));
                let present = vals.iter().filter(|v| v.is_some()).count();
                if present != 0 && present != 3 {
                    return Some(format!("pair ({i}, {j}) lacks some of XX, YY, ZZ"));
                }
                if exact && present == 3 {
                    let [x, y, z] = vals.map(Option::unwrap);
                    if !near(x, y) || !near(y, z) {
                        return Some(format!("pair ({i}, {j}): XX, YY, ZZ are not equal"));
                    }
                }
            }
            None
        }
    }
}

/// Most reduced scheme whose shape matches the data exactly; `General` otherwise.
pub fn select_scheme(ds: &CorrelationDataset) -> SymmetryScheme {
    let has_two = |a: Axis| ds.two_body().any(|(_, _, x, y, _)| x == a && y == a);
    if has_two(Axis::X) && shape_violation(ds, SymmetryScheme::RotationInvariant, true).is_none() {
        return SymmetryScheme::RotationInvariant;
    }
    let one_body_axes: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|&a| ds.one_body().any(|(_, ax, v)| ax == a && v.abs() > SHAPE_TOL))
        .collect();
    let candidates: Vec<Axis> = match one_body_axes.as_slice() {
        [] => vec![Axis::Z, Axis::X, Axis::Y],
        [a] => vec![*a],
        _ => return SymmetryScheme::General,
    };
    for &d in &candidates {
        let (t1, _) = transverse(d);
        let s = SymmetryScheme::TransverseSymmetric(d);
        if has_two(t1) && shape_violation(ds, s, true).is_none() {
            return s;
        }
    }
    let s = SymmetryScheme::AxisDiagonal(candidates[0]);
    if shape_violation(ds, s, true).is_none() {
        return s;
    }
    SymmetryScheme::General
}

/// Linear combination `sum coef * C_label` of measured correlators.
#[derive(Clone, Debug, PartialEq)]
pub struct DataExpr(pub Vec<(Label, f64)>);

impl DataExpr {
    pub fn single(label: Label) -> Self {
        DataExpr(vec![(label, 1.0)])
    }

    pub fn value(&self, ds: &CorrelationDataset) -> f64 {
        self.0.iter().map(|(l, c)| c * ds.get(l).expect("layout labels exist in the dataset")).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EntryKind {
    Constant(f64),
    /// Equals `(1 - lambda)` times the expression.
    Data(DataExpr),
    /// Free moment; entries sharing an id are equal.
    FreeVar(usize),
    Zero,
}

impl EntryKind {
    fn code(&self) -> char {
        match self {
            EntryKind::Constant(_) => 'C',
            EntryKind::Data(_) => 'D',
            EntryKind::FreeVar(_) => 'F',
            EntryKind::Zero => '.',
        }
    }
}

/// `sum coef * Gamma[r][c] = rhs` over upper-triangle entries `r <= c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<((usize, usize), f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct MomentMatrixLayout {
    pub basis: MonomialBasis,
    pub scheme: SymmetryScheme,
    /// Row-major `dim x dim`, symmetric.
    kinds: Vec<EntryKind>,
    /// Sphere constraints: per-site Pauli rows and higher-level substitutions.
    pub pauli_constraints: Vec<LinearConstraint>,
    /// Distinct free ids minus independent sphere constraints.
    pub free_var_count: usize,
    pub n_free_ids: usize,
    pub dataset: CorrelationDataset,
}

impl MomentMatrixLayout {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn kind(&self, r: usize, c: usize) -> &EntryKind {
        &self.kinds[r * self.dim() + c]
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites
    }

    /// Entry-kind grid: `C` constant, `D` data, `F` free, `.` zero.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# scheme {}; dim {}; free variables {}", self.scheme, self.dim(), self.free_var_count);
        for (r, m) in self.basis.monomials.iter().enumerate() {
            let row: String = (0..self.dim()).map(|c| self.kind(r, c).code()).collect();
            let _ = writeln!(s, "{row}  {m}");
        }
        s
    }

    /// Sets every entry from moments of an explicit distribution; used by completion tests.
    pub fn fill(&self, moment: impl Fn(&Monomial) -> f64) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| match self.kind(r, c) {
            EntryKind::Zero => 0.0,
            EntryKind::Constant(v) => *v,
            _ => moment(&self.basis.monomials[r].mul(&self.basis.monomials[c])),
        })
    }

    fn set(&mut self, r: usize, c: usize, k: EntryKind) {
        let d = self.dim();
        self.kinds[c * d + r] = k.clone();
        self.kinds[r * d + c] = k;
    }
}

/// Symbolic layout of `Gamma` for `ds` over `basis` under `scheme`.
pub fn build_layout(basis: &MonomialBasis, ds: &CorrelationDataset, scheme: SymmetryScheme) -> Result<MomentMatrixLayout> {
    if basis.n_sites != ds.n_sites() {
        return Err(Error::BadSize(format!("basis on {} sites, dataset on {}", basis.n_sites, ds.n_sites())));
    }
    if scheme == SymmetryScheme::General {
        return Ok(build_general(basis, ds));
    }
    let mismatch = |reason: String| Error::SchemeMismatch {
        scheme: scheme.to_string(),
        reason,
    };
    if !basis.is_plain_level_one() {
        return Err(mismatch("symmetry schemes are only valid for the plain level-1 basis".into()));
    }
    if let Some(reason) = shape_violation(ds, scheme, false) {
        return Err(mismatch(reason));
    }
    Ok(build_scheme(basis, ds, scheme))
}

fn empty_layout(basis: MonomialBasis, ds: &CorrelationDataset, scheme: SymmetryScheme) -> MomentMatrixLayout {
    let d = basis.len();
    MomentMatrixLayout {
        basis,
        scheme,
        kinds: vec![EntryKind::Zero; d * d],
        pauli_constraints: Vec::new(),
        free_var_count: 0,
        n_free_ids: 0,
        dataset: ds.clone(),
    }
}

fn build_scheme(basis: &MonomialBasis, ds: &CorrelationDataset, scheme: SymmetryScheme) -> MomentMatrixLayout {
    let n = ds.n_sites();
    let idx = |i: usize, a: Axis| 1 + 3 * i + a.index();
    let mut lay = empty_layout(basis.clone(), ds, scheme);
    let mut next_id = 0usize;
    let mut fresh = || {
        next_id += 1;
        next_id - 1
    };
    lay.set(0, 0, EntryKind::Constant(1.0));

    match scheme {
        SymmetryScheme::AxisDiagonal(d) | SymmetryScheme::TransverseSymmetric(d) => {
            let transverse_pair = match scheme {
                SymmetryScheme::TransverseSymmetric(_) => Some(transverse(d)),
                _ => None,
            };
            for i in 0..n {
                let k = match ds.one(i, d) {
                    Some(_) => EntryKind::Data(DataExpr::single(Label::one(i, d))),
                    None => EntryKind::FreeVar(fresh()),
                };
                lay.set(0, idx(i, d), k);
                match transverse_pair {
                    Some((t1, t2)) => {
                        let id = fresh();
                        lay.set(idx(i, t1), idx(i, t1), EntryKind::FreeVar(id));
                        lay.set(idx(i, t2), idx(i, t2), EntryKind::FreeVar(id));
                        lay.set(idx(i, d), idx(i, d), EntryKind::FreeVar(fresh()));
                    }
                    None => {
                        for a in Axis::ALL {
                            lay.set(idx(i, a), idx(i, a), EntryKind::FreeVar(fresh()));
                        }
                    }
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    let dd = match ds.two(i, j, d, d) {
                        Some(_) => EntryKind::Data(DataExpr::single(Label::two(i, j, d, d))),
                        None => EntryKind::FreeVar(fresh()),
                    };
                    lay.set(idx(i, d), idx(j, d), dd);
                    match transverse_pair {
                        Some((t1, t2)) => {
                            let k = match ds.two(i, j, t1, t1) {
                                Some(_) => EntryKind::Data(DataExpr(vec![
                                    (Label::two(i, j, t1, t1), 0.5),
                                    (Label::two(i, j, t2, t2), 0.5),
                                ])),
                                None => EntryKind::FreeVar(fresh()),
                            };
                            lay.set(idx(i, t1), idx(j, t1), k.clone());
                            lay.set(idx(i, t2), idx(j, t2), k);
                        }
                        None => {
                            for a in Axis::ALL.into_iter().filter(|&a| a != d) {
                                let k = match ds.two(i, j, a, a) {
                                    Some(_) => EntryKind::Data(DataExpr::single(Label::two(i, j, a, a))),
                                    None => EntryKind::FreeVar(fresh()),
                                };
                                lay.set(idx(i, a), idx(j, a), k);
                            }
                        }
                    }
                }
            }
        }
        SymmetryScheme::RotationInvariant => {
            for i in 0..n {
                for a in Axis::ALL {
                    lay.set(idx(i, a), idx(i, a), EntryKind::Constant(1.0 / 3.0));
                }
                for j in i + 1..n {
                    let k = match ds.two(i, j, Axis::X, Axis::X) {
                        Some(_) => EntryKind::Data(DataExpr(Axis::ALL.map(|a| (Label::two(i, j, a, a), 1.0 / 3.0)).to_vec())),
                        None => EntryKind::FreeVar(fresh()),
                    };
                    for a in Axis::ALL {
                        lay.set(idx(i, a), idx(j, a), k.clone());
                    }
                }
            }
        }
        SymmetryScheme::General => unreachable!("handled by build_general"),
    }

    for i in 0..n {
        let terms: Vec<_> = Axis::ALL.iter().map(|&a| ((idx(i, a), idx(i, a)), 1.0)).collect();
        if terms.iter().any(|((r, c), _)| matches!(lay.kind(*r, *c), EntryKind::FreeVar(_))) {
            lay.pauli_constraints.push(LinearConstraint { terms, rhs: 1.0 });
        }
    }
    lay.n_free_ids = next_id;
    lay.free_var_count = next_id - lay.pauli_constraints.len();
    lay
}

/// Unreduced layout at any level. Monomials with a `z_i^2` factor are removed from the
/// basis: their rows are linear combinations of the remaining rows once
/// `z_i^2 = 1 - x_i^2 - y_i^2` holds, so PSD-ness is unchanged and the reduced
/// matrix keeps a strictly feasible interior.
fn build_general(basis: &MonomialBasis, ds: &CorrelationDataset) -> MomentMatrixLayout {
    let reduced = MonomialBasis {
        n_sites: basis.n_sites,
        level: basis.level,
        monomials: basis.monomials.iter().filter(|m| m.z_squared_site().is_none()).cloned().collect(),
    };
    let mut lay = empty_layout(reduced, ds, SymmetryScheme::General);
    let d = lay.dim();

    // first upper-triangle entry holding each product monomial, in row-major order
    let mut rep: HashMap<Monomial, (usize, usize)> = HashMap::new();
    let mut free: Vec<Monomial> = Vec::new();
    let mut ids: HashMap<Monomial, usize> = HashMap::new();
    for r in 0..d {
        for c in r..d {
            let p = lay.basis.monomials[r].mul(&lay.basis.monomials[c]);
            rep.entry(p.clone()).or_insert((r, c));
            let kind = if p.degree() == 0 {
                EntryKind::Constant(1.0)
            } else if let Some(label) = p.data_label().filter(|l| ds.contains(l)) {
                EntryKind::Data(DataExpr::single(label))
            } else {
                let next = ids.len();
                let id = *ids.entry(p.clone()).or_insert_with(|| {
                    free.push(p.clone());
                    next
                });
                EntryKind::FreeVar(id)
            };
            lay.set(r, c, kind);
        }
    }

    // <m z_i^2> + <m x_i^2> + <m y_i^2> = <m>
    for p in &free {
        let Some(i) = p.z_squared_site() else { continue };
        let m = p.without(i, Axis::Z).and_then(|q| q.without(i, Axis::Z)).expect("z_i^2 divides p");
        let mx = m.mul(&Monomial::new(vec![(i, Axis::X), (i, Axis::X)]));
        let my = m.mul(&Monomial::new(vec![(i, Axis::Y), (i, Axis::Y)]));
        let mut terms = Vec::with_capacity(4);
        let mut ok = true;
        for (mono, coef) in [(p, 1.0), (&mx, 1.0), (&my, 1.0)] {
            match rep.get(mono) {
                Some(&e) => terms.push((e, coef)),
                None => ok = false,
            }
        }
        let rhs = if m.degree() == 0 {
            1.0
        } else {
            match rep.get(&m) {
                Some(&e) => terms.push((e, -1.0)),
                None => ok = false,
            }
            0.0
        };
        // equations touching moments outside the matrix are dropped; this only relaxes
        if ok {
            lay.pauli_constraints.push(LinearConstraint { terms, rhs });
        }
    }
    lay.n_free_ids = ids.len();
    lay.free_var_count = ids.len() - lay.pauli_constraints.len();
    lay
}

/// Eigenvalue test of `M_ii = 1`, `M_ij = C^XX + C^YY + C^ZZ`; PSD means not detected.
pub fn closed_form_check(ds: &CorrelationDataset) -> Result<(bool, f64)> {
    let n = ds.n_sites();
    let mut missing = Vec::new();
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut c = 0.0;
            for a in Axis::ALL {
                match ds.two(i, j, a, a) {
                    Some(v) => c += v,
                    None => missing.push(Label::two(i, j, a, a)),
                }
            }
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }
    let min = SymmetricEigen::new(m).eigenvalues.min();
    Ok((min >= -1e-12, min))
}
