//! Finite function spaces: sup-normed functions, signed point-mass measures
//! with the total-variation norm, and kernels (operators into a sup-normed
//! space stored as one measure per target point).
//!
//! Every compact space in this crate is a finite point set, so a continuous
//! function is just a vector of values and a regular Borel measure is a vector
//! of point masses. Points are addressed by their index.

use serde::{Deserialize, Serialize};

use crate::error::{BpbError, Result};

/// A finite set of points, optionally labelled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSet {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl PointSet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(BpbError::InvalidInput("a point set needs at least one point".into()));
        }
        Ok(PointSet { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut set = PointSet::new(labels.len())?;
        set.labels = Some(labels);
        Ok(set)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, point: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(point)).map(String::as_str)
    }

    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.size
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(BpbError::InvalidInput(format!("{what} entry {i} is not finite"))),
        None => Ok(()),
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(BpbError::DimensionMismatch { expected, found })
    }
}

/// Sup norm of a slice; zero for the empty slice.
pub fn sup_norm_of(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Sum of absolute values, accumulated left to right.
pub fn tv_norm_of(masses: &[f64]) -> f64 {
    masses.iter().fold(0.0, |acc, m| acc + m.abs())
}

/// `sum_t f(t) m(t)`, accumulated left to right (same order as
/// [`tv_norm_of`], so a perfectly aligned pairing reproduces the
/// total variation bit for bit).
pub fn pair_of(f: &[f64], m: &[f64]) -> f64 {
    f.iter().zip(m).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// A real function on a finite point set, normed by the sup norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FuncRepr", into = "FuncRepr")]
pub struct Func {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FuncRepr {
    values: Vec<f64>,
}

impl TryFrom<FuncRepr> for Func {
    type Error = BpbError;
    fn try_from(repr: FuncRepr) -> Result<Self> {
        Func::new(repr.values)
    }
}

impl From<Func> for FuncRepr {
    fn from(f: Func) -> Self {
        FuncRepr { values: f.values }
    }
}

impl Func {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(BpbError::InvalidInput("a function needs at least one point".into()));
        }
        check_finite(&values, "function")?;
        Ok(Func { values })
    }

    pub fn zeros(n: usize) -> Self {
        Func { values: vec![0.0; n.max(1)] }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Func { values: vec![value; n.max(1)] }
    }

    /// Indicator function of `set` on `n` points.
    pub fn indicator(n: usize, set: &[usize]) -> Self {
        let mut values = vec![0.0; n.max(1)];
        for &t in set {
            values[t] = 1.0;
        }
        Func { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain(&self) -> PointSet {
        PointSet {
            size: self.values.len(),
            labels: None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm_of(&self.values)
    }

    pub fn neg(&self) -> Func {
        Func {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn sub(&self, other: &Func) -> Result<Func> {
        check_len(self.len(), other.len())?;
        Ok(Func {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Func {
        Func {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// A signed measure on a finite point set: one real mass per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct Measure {
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    masses: Vec<f64>,
}

impl TryFrom<MeasureRepr> for Measure {
    type Error = BpbError;
    fn try_from(repr: MeasureRepr) -> Result<Self> {
        Measure::new(repr.masses)
    }
}

impl From<Measure> for MeasureRepr {
    fn from(m: Measure) -> Self {
        MeasureRepr { masses: m.masses }
    }
}

impl Measure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(BpbError::InvalidInput("a measure needs at least one point".into()));
        }
        check_finite(&masses, "measure")?;
        Ok(Measure { masses })
    }

    pub fn zeros(n: usize) -> Self {
        Measure { masses: vec![0.0; n.max(1)] }
    }

    /// Unit point mass at `point`.
    pub fn dirac(n: usize, point: usize) -> Self {
        let mut masses = vec![0.0; n.max(1)];
        masses[point] = 1.0;
        Measure { masses }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn tv_norm(&self) -> f64 {
        tv_norm_of(&self.masses)
    }

    /// `m(set)`.
    pub fn mass_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&t| self.masses[t]).sum()
    }

    /// `|m|(set)`.
    pub fn variation_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&t| self.masses[t].abs()).sum()
    }

    pub fn sub(&self, other: &Measure) -> Result<Measure> {
        check_len(self.len(), other.len())?;
        Ok(Measure {
            masses: self.masses.iter().zip(&other.masses).map(|(a, b)| a - b).collect(),
        })
    }
}

/// `<f, m> = sum_t f(t) m(t)`.
pub fn pair(f: &Func, m: &Measure) -> Result<f64> {
    check_len(f.len(), m.len())?;
    Ok(pair_of(&f.values, &m.masses))
}

pub fn sup_norm(f: &Func) -> f64 {
    f.sup_norm()
}

pub fn tv_norm(m: &Measure) -> f64 {
    m.tv_norm()
}

/// `osc(f, block) = max_block f - min_block f`.
pub fn oscillation(f: &Func, block: &[usize]) -> Result<f64> {
    let mut points = block.iter();
    let first = *points.next().ok_or(BpbError::EmptyBlock)?;
    let check = |t: usize| {
        if t < f.len() {
            Ok(f.values[t])
        } else {
            Err(BpbError::InvalidInput(format!("point {t} outside a domain of {}", f.len())))
        }
    };
    let v = check(first)?;
    let (mut lo, mut hi) = (v, v);
    for &t in points {
        let v = check(t)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

/// Hahn decomposition of a discrete signed measure. Zero masses go to the
/// positive set.
pub fn hahn_split(m: &Measure) -> (Vec<usize>, Vec<usize>) {
    (0..m.len()).partition(|&t| m.masses[t] >= 0.0)
}

/// An operator `C(K) -> C(S)` stored as one row measure on `K` per point of
/// `S`. Its operator norm is the largest row total variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = BpbError;
    fn try_from(repr: KernelRepr) -> Result<Self> {
        Kernel::new(repr.rows)
    }
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> Self {
        KernelRepr { rows: k.rows }
    }
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| BpbError::InvalidInput("a kernel needs at least one row".into()))?;
        if width == 0 {
            return Err(BpbError::InvalidInput("kernel rows must be non-empty".into()));
        }
        for row in &rows {
            check_len(width, row.len())?;
            check_finite(row, "kernel")?;
        }
        Ok(Kernel { rows })
    }

    pub fn from_measures(rows: Vec<Measure>) -> Result<Self> {
        Kernel::new(rows.into_iter().map(Measure::into_masses).collect())
    }

    /// Number of points of the source space `K`.
    pub fn source_dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Number of points of the target space `S`.
    pub fn target_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn row_measure(&self, s: usize) -> Measure {
        Measure {
            masses: self.rows[s].clone(),
        }
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| tv_norm_of(r)).collect()
    }

    /// Operator norm: the maximum row total variation.
    pub fn norm(&self) -> f64 {
        self.rows.iter().fold(0.0, |acc: f64, r| acc.max(tv_norm_of(r)))
    }

    /// `(T f)(s) = <f, row_s>`.
    pub fn apply(&self, f: &Func) -> Result<Func> {
        check_len(self.source_dim(), f.len())?;
        Ok(Func {
            values: self.rows.iter().map(|r| pair_of(&f.values, r)).collect(),
        })
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel> {
        check_len(self.target_dim(), other.target_dim())?;
        check_len(self.source_dim(), other.source_dim())?;
        Ok(Kernel {
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Kernel {
        Kernel {
            rows: self.rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect(),
        }
    }

    pub fn neg(&self) -> Kernel {
        self.scale(-1.0)
    }
}

/// Operator norm of a kernel.
pub fn kernel_norm(t: &Kernel) -> f64 {
    t.norm()
}
