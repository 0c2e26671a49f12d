//! Matrix operators between finite-dimensional normed spaces, and the exact
//! operator-norm oracles used to check every certificate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BpbError, Result};
use crate::spaces::{check_len, sup_norm_of, Kernel};

/// Largest source dimension the sign-vector enumeration accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 20;

/// Norm on `R^n`: the sup norm, a `p`-norm, or the Euclidean norm.
///
/// Canonical forms: `p = 2` is `Euclid` and `p = inf` is `Sup`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NormKind {
    Sup,
    P(f64),
    Euclid,
}

impl NormKind {
    pub fn p(p: f64) -> Result<NormKind> {
        if p.is_nan() || p < 1.0 {
            return Err(BpbError::InvalidInput(format!("p-norm exponent {p} must be >= 1")));
        }
        Ok(if p.is_infinite() {
            NormKind::Sup
        } else if p == 2.0 {
            NormKind::Euclid
        } else {
            NormKind::P(p)
        })
    }

    /// Exponent of the norm, `inf` for the sup norm.
    pub fn exponent(self) -> f64 {
        match self {
            NormKind::Sup => f64::INFINITY,
            NormKind::P(p) => p,
            NormKind::Euclid => 2.0,
        }
    }

    pub fn is_sup(self) -> bool {
        matches!(self, NormKind::Sup)
    }

    pub fn is_euclid(self) -> bool {
        matches!(self, NormKind::Euclid)
    }

    /// The dual norm.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::Sup => NormKind::P(1.0),
            NormKind::Euclid => NormKind::Euclid,
            NormKind::P(1.0) => NormKind::Sup,
            NormKind::P(p) => NormKind::p(p / (p - 1.0)).expect("conjugate exponent of p > 1"),
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormKind::Sup => sup_norm_of(x),
            NormKind::Euclid => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::P(1.0) => x.iter().map(|v| v.abs()).sum(),
            NormKind::P(p) => {
                // scale by the largest entry to keep |x|^p in range
                let m = sup_norm_of(x);
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }

    /// A unit dual vector `j` with `j(x) = ||x||`. Zero maps to zero.
    pub fn norming_functional(self, x: &[f64]) -> Vec<f64> {
        let n = self.norm(x);
        if n == 0.0 {
            return vec![0.0; x.len()];
        }
        match self {
            NormKind::Sup => {
                let k = argmax_abs(x);
                let mut j = vec![0.0; x.len()];
                j[k] = x[k].signum();
                j
            }
            NormKind::Euclid => x.iter().map(|v| v / n).collect(),
            NormKind::P(1.0) => x
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { v.signum() })
                .collect(),
            NormKind::P(p) => x
                .iter()
                .map(|&v| v.signum() * (v.abs() / n).powf(p - 1.0))
                .collect(),
        }
    }

    /// A unit vector `y` of this space at which the dual vector `f` attains
    /// its dual norm, so `f(y) = ||f||_*`. `fill` breaks ties on coordinates
    /// where the attainment set is not a single point (zero entries of `f`
    /// for the sup norm; it is ignored elsewhere).
    pub fn attaining_point(self, f: &[f64], fill: Option<&[f64]>) -> Vec<f64> {
        let dual = self.dual();
        let fn_norm = dual.norm(f);
        if fn_norm == 0.0 {
            let mut y = vec![0.0; f.len()];
            y[0] = 1.0;
            return y;
        }
        match self {
            NormKind::Sup => f
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v != 0.0 {
                        v.signum()
                    } else {
                        fill.map_or(1.0, |x| x[i].clamp(-1.0, 1.0))
                    }
                })
                .collect(),
            NormKind::Euclid => f.iter().map(|v| v / fn_norm).collect(),
            NormKind::P(1.0) => {
                let k = argmax_abs(f);
                let mut y = vec![0.0; f.len()];
                y[k] = f[k].signum();
                y
            }
            NormKind::P(p) => {
                let q = p / (p - 1.0);
                let y: Vec<f64> = f
                    .iter()
                    .map(|&v| v.signum() * (v.abs() / fn_norm).powf(q - 1.0))
                    .collect();
                let n = self.norm(&y);
                y.into_iter().map(|v| v / n).collect()
            }
        }
    }
}

fn argmax_abs(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Sup => write!(f, "sup"),
            NormKind::Euclid => write!(f, "euclid"),
            NormKind::P(p) => write!(f, "p:{p}"),
        }
    }
}

impl FromStr for NormKind {
    type Err = BpbError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sup" => Ok(NormKind::Sup),
            "euclid" => Ok(NormKind::Euclid),
            other => {
                let exponent = other
                    .strip_prefix("p:")
                    .ok_or_else(|| BpbError::InvalidInput(format!("unknown norm tag {other:?}")))?;
                let p: f64 = exponent
                    .parse()
                    .map_err(|_| BpbError::InvalidInput(format!("bad p-norm exponent {exponent:?}")))?;
                NormKind::p(p)
            }
        }
    }
}

impl TryFrom<String> for NormKind {
    type Error = BpbError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormKind> for String {
    fn from(n: NormKind) -> String {
        n.to_string()
    }
}

/// A linear map `R^source -> R^target` with a norm on each side. `matrix`
/// holds one row per target coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct GeneralOperator {
    matrix: Vec<Vec<f64>>,
    source_norm: NormKind,
    target_norm: NormKind,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    matrix: Vec<Vec<f64>>,
    source_norm: NormKind,
    target_norm: NormKind,
}

impl TryFrom<OperatorRepr> for GeneralOperator {
    type Error = BpbError;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        GeneralOperator::new(r.matrix, r.source_norm, r.target_norm)
    }
}

impl From<GeneralOperator> for OperatorRepr {
    fn from(op: GeneralOperator) -> Self {
        OperatorRepr {
            matrix: op.matrix,
            source_norm: op.source_norm,
            target_norm: op.target_norm,
        }
    }
}

impl GeneralOperator {
    pub fn new(matrix: Vec<Vec<f64>>, source_norm: NormKind, target_norm: NormKind) -> Result<Self> {
        let width = matrix
            .first()
            .map(Vec::len)
            .ok_or_else(|| BpbError::InvalidInput("an operator needs at least one row".into()))?;
        if width == 0 {
            return Err(BpbError::InvalidInput("operator rows must be non-empty".into()));
        }
        for row in &matrix {
            check_len(width, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(BpbError::InvalidInput("operator entries must be finite".into()));
            }
        }
        Ok(GeneralOperator {
            matrix,
            source_norm,
            target_norm,
        })
    }

    /// The kernel viewed as a sup-to-sup operator.
    pub fn from_kernel(k: &Kernel) -> Self {
        GeneralOperator {
            matrix: k.rows().to_vec(),
            source_norm: NormKind::Sup,
            target_norm: NormKind::Sup,
        }
    }

    pub fn identity(n: usize, norm: NormKind) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        GeneralOperator {
            matrix,
            source_norm: norm,
            target_norm: norm,
        }
    }

    pub fn zeros(target: usize, source: usize, source_norm: NormKind, target_norm: NormKind) -> Self {
        GeneralOperator {
            matrix: vec![vec![0.0; source.max(1)]; target.max(1)],
            source_norm,
            target_norm,
        }
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn into_matrix(self) -> Vec<Vec<f64>> {
        self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[j]).collect()
    }

    pub fn source_norm(&self) -> NormKind {
        self.source_norm
    }

    pub fn target_norm(&self) -> NormKind {
        self.target_norm
    }

    pub fn source_dim(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.source_dim(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|r| r.iter().zip(x).fold(0.0, |acc, (a, b)| acc + a * b))
            .collect()
    }

    /// `||A x||` in the target norm.
    pub fn image_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.target_norm.norm(&self.apply(x)?))
    }

    fn same_shape(&self, other: &GeneralOperator) -> Result<()> {
        check_len(self.target_dim(), other.target_dim())?;
        check_len(self.source_dim(), other.source_dim())
    }

    pub fn sub(&self, other: &GeneralOperator) -> Result<GeneralOperator> {
        self.same_shape(other)?;
        let matrix = self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(GeneralOperator { matrix, ..*self })
    }

    pub fn add(&self, other: &GeneralOperator) -> Result<GeneralOperator> {
        self.same_shape(other)?;
        let matrix = self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(GeneralOperator { matrix, ..*self })
    }

    pub fn scale(&self, c: f64) -> GeneralOperator {
        GeneralOperator {
            matrix: self.matrix.iter().map(|r| r.iter().map(|v| c * v).collect()).collect(),
            ..*self
        }
    }

    /// `self ∘ inner`. The source norm is taken from `inner`.
    pub fn compose(&self, inner: &GeneralOperator) -> Result<GeneralOperator> {
        check_len(self.source_dim(), inner.target_dim())?;
        let n = inner.source_dim();
        let matrix = self
            .matrix
            .iter()
            .map(|r| {
                (0..n)
                    .map(|j| r.iter().zip(&inner.matrix).fold(0.0, |acc, (a, row)| acc + a * row[j]))
                    .collect()
            })
            .collect();
        Ok(GeneralOperator {
            matrix,
            source_norm: inner.source_norm,
            target_norm: self.target_norm,
        })
    }

    pub fn with_norms(mut self, source_norm: NormKind, target_norm: NormKind) -> Self {
        self.source_norm = source_norm;
        self.target_norm = target_norm;
        self
    }

    /// Exact operator norm for a sup-normed source by enumerating the
    /// extreme points of the unit ball (sign vectors), up to `cap` coordinates.
    ///
    /// Only sign vectors with a leading `+1` are visited: `||A(-x)|| = ||A x||`.
    pub fn oracle_norm_with_cap(&self, cap: usize) -> Result<(f64, Vec<f64>)> {
        if !self.source_norm.is_sup() {
            return Err(BpbError::Unsupported(format!(
                "sign-vector oracle needs a sup-normed source, found {}",
                self.source_norm
            )));
        }
        let n = self.source_dim();
        if n > cap {
            return Err(BpbError::OracleCap { dim: n, cap });
        }
        let mut sigma = vec![1.0; n];
        let mut best = (-1.0, sigma.clone());
        for mask in 0u64..(1u64 << (n - 1)) {
            for (j, s) in sigma.iter_mut().enumerate().skip(1) {
                *s = if mask >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 };
            }
            let v = self.target_norm.norm(&self.apply_unchecked(&sigma));
            if v > best.0 {
                best = (v, sigma.clone());
            }
        }
        Ok(best)
    }

    pub fn oracle_norm(&self) -> Result<(f64, Vec<f64>)> {
        self.oracle_norm_with_cap(DEFAULT_ORACLE_CAP)
    }

    /// Exact operator norm whenever a closed form or a finite enumeration is
    /// available: sup-normed sources (sign vectors), sup-normed targets
    /// (largest dual row norm) and `l1` sources (largest column norm).
    pub fn operator_norm(&self) -> Result<f64> {
        if self.source_norm.is_sup() {
            return Ok(self.oracle_norm()?.0);
        }
        if self.target_norm.is_sup() {
            let dual = self.source_norm.dual();
            return Ok(self.matrix.iter().fold(0.0, |acc: f64, r| acc.max(dual.norm(r))));
        }
        if self.source_norm == NormKind::P(1.0) {
            return Ok((0..self.source_dim())
                .fold(0.0, |acc: f64, j| acc.max(self.target_norm.norm(&self.column(j)))));
        }
        Err(BpbError::Unsupported(format!(
            "no exact norm for {} -> {}",
            self.source_norm, self.target_norm
        )))
    }
}

/// Exact operator norm of a sup-source operator with the default cap.
pub fn oracle_norm(a: &GeneralOperator) -> Result<(f64, Vec<f64>)> {
    a.oracle_norm()
}
