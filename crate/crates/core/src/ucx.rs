//! Norm-attaining corrections for compact operators from `C0(L)` into a
//! Euclidean space.
//!
//! The operator is first replaced by `T P` for an averaging projection `P`
//! onto block-constant functions; on the block coordinates it becomes a map
//! `l∞^m -> Y` that [`ucx_correct`] turns into a norm-attaining one, and the
//! resulting attaining point is glued back onto `f0` off the blocks.

use serde::{Deserialize, Serialize};

use crate::certificate::{BpbCertificate, DEFAULT_TOL};
use crate::ck_cs::ROUNDING;
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::partition::{build_partition, PartitionOptions, PartitionProjection, PartitionTrace};
use crate::spaces::{check_len, sup_norm_of, Func};

/// `γ(t) = coeff · t²`, the modulus consumed by [`ucx_correct`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModulus {
    pub coeff: f64,
}

impl Default for QuadraticModulus {
    fn default() -> Self {
        QuadraticModulus { coeff: 1.0 / 16.0 }
    }
}

impl QuadraticModulus {
    pub fn gamma(&self, t: f64) -> f64 {
        self.coeff * t * t
    }
}

/// `δ` and `α = η(ε)` with `δ < ε/4`, `γ(δ) < ε/4` and
/// `α < min{δ, γ(δ)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcxParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma_delta: f64,
    pub modulus: QuadraticModulus,
}

impl UcxParams {
    /// `δ` starts at `ε/8` and halves until `γ(δ) < ε/4`;
    /// `α = 0.9 min{δ, γ(δ)/2}`.
    pub fn new(epsilon: f64, modulus: QuadraticModulus) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must lie in (0, 1)")));
        }
        if !(modulus.coeff > 0.0 && modulus.coeff.is_finite()) {
            return Err(BpbError::InvalidInput("modulus coefficient must be positive".into()));
        }
        let mut delta = epsilon / 8.0;
        while modulus.gamma(delta) >= epsilon / 4.0 {
            delta /= 2.0;
        }
        let gamma_delta = modulus.gamma(delta);
        Ok(UcxParams {
            epsilon,
            delta,
            alpha: 0.9 * delta.min(gamma_delta / 2.0),
            gamma_delta,
            modulus,
        })
    }

    /// `2δ + γ(δ) + α`, the bound on `||S - T||`.
    pub fn chain_bound(&self) -> f64 {
        2.0 * self.delta + self.gamma_delta + self.alpha
    }
}

/// `Φ: span{φ_j} -> l∞^m`, `φ_j -> e_j`, for disjoint indicator bumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockIsometry {
    blocks: Vec<Vec<usize>>,
    dim: usize,
}

impl BlockIsometry {
    pub fn new(projection: &PartitionProjection) -> Self {
        BlockIsometry {
            blocks: projection.blocks().to_vec(),
            dim: projection.dim(),
        }
    }

    /// Number of blocks `m`.
    pub fn dimension(&self) -> usize {
        self.blocks.len()
    }

    pub fn bumps(&self) -> Vec<Func> {
        self.blocks.iter().map(|b| Func::indicator(self.dim, b)).collect()
    }

    /// Coordinates of `f = Σ c_j φ_j`. Fails if `f` is not of that form.
    pub fn forward(&self, f: &Func) -> Result<Vec<f64>> {
        check_len(self.dim, f.len())?;
        let v = f.values();
        let mut covered = vec![false; self.dim];
        let mut coords = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let c = v[block[0]];
            if block.iter().any(|&t| v[t] != c) {
                return Err(BpbError::InvalidInput("function is not constant on a block".into()));
            }
            block.iter().for_each(|&t| covered[t] = true);
            coords.push(c);
        }
        if (0..self.dim).any(|t| !covered[t] && v[t] != 0.0) {
            return Err(BpbError::InvalidInput("function does not vanish off the blocks".into()));
        }
        Ok(coords)
    }

    /// `Σ c_j φ_j`.
    pub fn inverse(&self, coords: &[f64]) -> Result<Func> {
        check_len(self.blocks.len(), coords.len())?;
        let mut values = vec![0.0; self.dim];
        for (block, &c) in self.blocks.iter().zip(coords) {
            block.iter().for_each(|&t| values[t] = c);
        }
        Func::new(values)
    }

    /// `T ∘ Φ⁻¹` as an operator on `l∞^m`: column `j` sums the columns of
    /// `T` over block `j`.
    pub fn pull_back(&self, t: &GeneralOperator) -> Result<GeneralOperator> {
        check_len(self.dim, t.source_dim())?;
        let matrix = t
            .matrix()
            .iter()
            .map(|row| {
                self.blocks
                    .iter()
                    .map(|b| b.iter().fold(0.0, |acc, &s| acc + row[s]))
                    .collect()
            })
            .collect();
        GeneralOperator::new(matrix, NormKind::Sup, t.target_norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UcxCorrection {
    pub v: GeneralOperator,
    pub x1: Vec<f64>,
    /// Coordinates pushed to `±1`.
    pub flattened: Vec<usize>,
    /// Boost weight; zero when no boost was needed.
    pub boost: f64,
    /// Oracle values of `||V - U||` and `||V||`.
    pub dist_operator: f64,
    pub dist_point: f64,
    pub norm: f64,
}

/// Correct `U: l∞^m -> R^p` (Euclidean, `||U|| = 1`) and `x0` (`||x0|| = 1`)
/// with `||U x0|| > 1 - γ(ε)` into `V`, `x1` with `||V x1|| = ||V|| = 1`,
/// `||V - U|| < ε` and `||x1 - x0|| < ε`.
///
/// Realization. For a candidate set `F` of coordinates with
/// `|x0_j| >= 1 - ε/2` (the `k` largest, for every `k`), put
/// `x1 = sgn(x0)` on `F` and `x1 = x0` elsewhere, and drop the columns of `U`
/// outside `F` (a Euclidean-valued map can only attain at a point with
/// interior coordinates if those columns vanish). With `U_F` the result,
/// `A = ||U_F x1||`, `w = U_F x1/A` and `φ = sgn(x1)/|F|` on `F`, the boost
/// `V0 = U_F + c w⊗φ` satisfies `||V0 σ|| <= ||U_F|| + c (1 - 2/|F|)` for
/// every sign vector `σ ≠ ±x1` on `F`, so it attains at `x1` once
/// `c >= |F| (||U_F|| - A)/2`. The smallest attaining `c` on a geometric
/// ladder is used, `V = V0/||V0 x1||`, and the candidate closest to `U` that
/// passes every oracle check is returned.
pub fn ucx_correct(
    u: &GeneralOperator,
    x0: &[f64],
    epsilon: f64,
    modulus: &QuadraticModulus,
    tol: f64,
) -> Result<UcxCorrection> {
    const STAGE: &str = "ucx_correct";
    if !u.source_norm().is_sup() || !u.target_norm().is_euclid() {
        return Err(BpbError::Unsupported(format!(
            "ucx_correct needs sup -> euclid, found {} -> {}",
            u.source_norm(),
            u.target_norm()
        )));
    }
    check_len(u.source_dim(), x0.len())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must be positive")));
    }
    let (u_norm, _) = u.oracle_norm()?;
    if (u_norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||U|| = {u_norm} is not 1")));
    }
    if (sup_norm_of(x0) - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||x0|| = {} is not 1", sup_norm_of(x0))));
    }
    let value = u.image_norm(x0)?;
    let slack = 1.0 - value;
    if slack >= modulus.gamma(epsilon) {
        return Err(BpbError::pre(
            STAGE,
            format!("1 - ||U x0|| = {slack:.6e} is not below gamma(epsilon) = {:.6e}", modulus.gamma(epsilon)),
        ));
    }
    if u_norm - value <= ROUNDING {
        return Ok(UcxCorrection {
            v: u.clone(),
            x1: x0.to_vec(),
            flattened: Vec::new(),
            boost: 0.0,
            dist_operator: 0.0,
            dist_point: 0.0,
            norm: u_norm,
        });
    }

    let m = u.source_dim();
    let mut order: Vec<usize> = (0..m).filter(|&j| x0[j].abs() >= 1.0 - epsilon / 2.0).collect();
    order.sort_by(|&a, &b| x0[b].abs().total_cmp(&x0[a].abs()).then(a.cmp(&b)));

    let mut best: Option<UcxCorrection> = None;
    for k in 1..=order.len() {
        let mut f_set = order[..k].to_vec();
        f_set.sort_unstable();
        if let Some(candidate) = boost_candidate(u, x0, &f_set)? {
            if candidate.dist_operator < epsilon
                && candidate.dist_point < epsilon
                && best.as_ref().is_none_or(|b| candidate.dist_operator < b.dist_operator)
            {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| BpbError::BudgetExhausted {
        stage: STAGE,
        detail: format!("no boost candidate within epsilon = {epsilon} ({} sets tried)", order.len()),
    })
}

fn boost_candidate(u: &GeneralOperator, x0: &[f64], f_set: &[usize]) -> Result<Option<UcxCorrection>> {
    let m = u.source_dim();
    let mut in_f = vec![false; m];
    f_set.iter().for_each(|&j| in_f[j] = true);
    let x1: Vec<f64> = (0..m)
        .map(|j| if in_f[j] { if x0[j] < 0.0 { -1.0 } else { 1.0 } } else { x0[j] })
        .collect();
    let u_f = GeneralOperator::new(
        u.matrix()
            .iter()
            .map(|r| (0..m).map(|j| if in_f[j] { r[j] } else { 0.0 }).collect())
            .collect(),
        NormKind::Sup,
        NormKind::Euclid,
    )?;
    let image = u_f.apply(&x1)?;
    let a = NormKind::Euclid.norm(&image);
    if a == 0.0 {
        return Ok(None);
    }
    let (uf_norm, _) = u_f.oracle_norm()?;
    let w: Vec<f64> = image.iter().map(|v| v / a).collect();
    let weight = 1.0 / f_set.len() as f64;
    let phi: Vec<f64> = (0..m).map(|j| if in_f[j] { x1[j] * weight } else { 0.0 }).collect();
    let provable = f_set.len() as f64 * (uf_norm - a).max(0.0) / 2.0;

    let ladder = std::iter::once(0.0).chain((0..=40).rev().map(|k| provable * 0.5f64.powi(k)));
    for c in ladder {
        let v0 = GeneralOperator::new(
            u_f.matrix()
                .iter()
                .zip(&w)
                .map(|(r, wi)| r.iter().zip(&phi).map(|(x, ph)| x + c * wi * ph).collect())
                .collect(),
            NormKind::Sup,
            NormKind::Euclid,
        )?;
        let scale = v0.image_norm(&x1)?;
        let v = v0.scale(1.0 / scale);
        let (norm, _) = v.oracle_norm()?;
        let attained = v.image_norm(&x1)?;
        if norm - attained <= ROUNDING {
            let dist_operator = v.sub(u)?.oracle_norm()?.0;
            let dist_point = sup_norm_of(&x1.iter().zip(x0).map(|(a, b)| a - b).collect::<Vec<_>>());
            return Ok(Some(UcxCorrection {
                v,
                x1,
                flattened: f_set.to_vec(),
                boost: c,
                dist_operator,
                dist_point,
                norm,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcxOptions {
    pub modulus: QuadraticModulus,
    pub tol: f64,
    pub partition: PartitionOptions,
}

impl Default for UcxOptions {
    fn default() -> Self {
        UcxOptions {
            modulus: QuadraticModulus::default(),
            tol: DEFAULT_TOL,
            partition: PartitionOptions::default(),
        }
    }
}

/// Measured terms of `||S - T|| <= ||V - U|| + ||U - U1|| + ||TP - T||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcxLedger {
    pub v_minus_u: f64,
    pub u_minus_u1: f64,
    pub tp_minus_t: f64,
    /// `||T P f0||`, which must exceed `1 - 2α`.
    pub tp_f0: f64,
    /// `max |P f0 - f0|` over the blocks, at most `α`.
    pub averaging_error: f64,
    /// `max |f1 - f0|` over the blocks.
    pub glue_error: f64,
    /// `2δ + γ(δ) + α`.
    pub chain_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UcxResult {
    pub s: GeneralOperator,
    pub g0: Func,
    pub f1: Func,
    pub certificate: BpbCertificate,
    pub params: UcxParams,
    pub slack: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub u1: GeneralOperator,
    pub u: GeneralOperator,
    pub v: GeneralOperator,
    /// `O = {|f1 - f0| < 3δ + γ(δ)}`.
    pub o: Vec<usize>,
    /// Indicator of `O`.
    pub psi: Func,
    pub projection: PartitionProjection,
    pub partition: PartitionTrace,
    pub correction: UcxCorrection,
    pub ledger: UcxLedger,
}

/// Correct `T: C0(L) -> R^p` (sup source, Euclidean target, `||T|| = 1`) and
/// `f0` (`||f0|| = 1`, `||T f0|| > 1 - α`) into `S`, `g0` with
/// `||S g0|| = ||S|| = 1`, `||S - T|| < ε` and `||g0 - f0|| < ε`.
pub fn correct_ucx(t: &GeneralOperator, f0: &Func, epsilon: f64, opts: &UcxOptions) -> Result<UcxResult> {
    const STAGE: &str = "correct_ucx";
    let tol = opts.tol;
    let params = UcxParams::new(epsilon, opts.modulus)?;
    if !t.source_norm().is_sup() || !t.target_norm().is_euclid() {
        return Err(BpbError::Unsupported(format!(
            "correct_ucx needs sup -> euclid, found {} -> {}",
            t.source_norm(),
            t.target_norm()
        )));
    }
    check_len(t.source_dim(), f0.len())?;
    let (t_norm, _) = t.oracle_norm()?;
    if (t_norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||T|| = {t_norm} is not 1")));
    }
    if (f0.sup_norm() - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||f0|| = {} is not 1", f0.sup_norm())));
    }
    let slack = 1.0 - t.image_norm(f0.values())?;
    if slack >= params.alpha {
        return Err(BpbError::pre(
            STAGE,
            format!("1 - ||T f0|| = {slack:.6e} is not below alpha = {:.6e}", params.alpha),
        ));
    }

    let (projection, partition) = build_partition(t, f0, params.alpha, &opts.partition)?;
    let phi = BlockIsometry::new(&projection);
    let pf0 = projection.apply(f0)?;
    let tp_f0 = t.image_norm(pf0.values())?;
    if tp_f0 <= 1.0 - 2.0 * params.alpha {
        return Err(BpbError::post(STAGE, format!("||T P f0|| = {tp_f0} <= 1 - 2 alpha")));
    }
    let averaging_error = projection
        .blocks()
        .iter()
        .flatten()
        .fold(0.0, |acc: f64, &s| acc.max((pf0.values()[s] - f0.values()[s]).abs()));
    if averaging_error > params.alpha {
        return Err(BpbError::post(STAGE, format!("|P f0 - f0| = {averaging_error} > alpha on a block")));
    }

    let x0 = projection.coordinates(f0)?;
    let u1 = phi.pull_back(t)?;
    let (u1_norm, _) = u1.oracle_norm()?;
    let u = u1.scale(1.0 / u1_norm);
    let x0_norm = sup_norm_of(&x0);
    let x0_unit: Vec<f64> = x0.iter().map(|v| v / x0_norm).collect();
    let correction = ucx_correct(&u, &x0_unit, params.delta, &opts.modulus, tol)?;
    let x1 = correction.x1.clone();
    let v = correction.v.clone();

    let f1 = phi.inverse(&x1)?;
    let radius = 3.0 * params.delta + params.gamma_delta;
    let o: Vec<usize> = (0..f0.len())
        .filter(|&s| (f1.values()[s] - f0.values()[s]).abs() < radius)
        .collect();
    let glue_error = projection
        .blocks()
        .iter()
        .flatten()
        .fold(0.0, |acc: f64, &s| acc.max((f1.values()[s] - f0.values()[s]).abs()));
    if glue_error >= radius {
        return Err(BpbError::post(STAGE, format!("|f1 - f0| = {glue_error} >= 3 delta + gamma on a block")));
    }
    let psi = Func::indicator(f0.len(), &o);
    let g0 = Func::new(
        (0..f0.len())
            .map(|s| if psi.values()[s] == 1.0 { f1.values()[s] } else { f0.values()[s] })
            .collect(),
    )?;

    // S = V ∘ Φ ∘ P: row i of S spreads V[i][j] over block j by weight.
    let w = projection.weight().masses();
    let mut s_matrix = vec![vec![0.0; f0.len()]; v.target_dim()];
    for (j, block) in projection.blocks().iter().enumerate() {
        let total = projection.block_weight(j);
        for (i, row) in s_matrix.iter_mut().enumerate() {
            for &s in block {
                row[s] = v.row(i)[j] * (w[s] / total);
            }
        }
    }
    let s = GeneralOperator::new(s_matrix, NormKind::Sup, NormKind::Euclid)?;

    let tp = t.compose(&projection.as_operator())?;
    let ledger = UcxLedger {
        v_minus_u: correction.dist_operator,
        u_minus_u1: u.sub(&u1)?.oracle_norm()?.0,
        tp_minus_t: tp.sub(t)?.oracle_norm()?.0,
        tp_f0,
        averaging_error,
        glue_error,
        chain_bound: params.chain_bound(),
    };
    if ledger.chain_bound >= epsilon {
        return Err(BpbError::post(STAGE, format!("chain bound {} >= epsilon", ledger.chain_bound)));
    }

    let certificate = BpbCertificate {
        witness: g0.values().to_vec(),
        attained_norm: s.image_norm(g0.values())?,
        operator_norm: s.oracle_norm()?.0,
        dist_point: g0.sub(f0)?.sup_norm(),
        dist_operator: s.sub(t)?.oracle_norm()?.0,
        epsilon,
        tol,
    };
    let violations = certificate.violations();
    if !violations.is_empty() {
        return Err(BpbError::post(STAGE, violations.join("; ")));
    }
    Ok(UcxResult {
        s,
        g0,
        f1,
        certificate,
        params,
        slack,
        x0,
        x1,
        u1,
        u,
        v,
        o,
        psi,
        projection,
        partition,
        correction,
        ledger,
    })
}
