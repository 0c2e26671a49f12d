//! Norm-attaining corrections for operators from a finite-dimensional
//! `p`-normed space into a `c0`-style space: sup-normed coordinates, of
//! which an operator uses finitely many.
//!
//! [`scalar_bpb`] corrects a single functional, [`bpb_into_linf`] lifts it
//! to operators into `l∞^n` by replacing one row, and [`correct_predual`]
//! truncates the target to the first `m` coordinates before doing so.

use serde::{Deserialize, Serialize};

use crate::certificate::{BpbCertificate, DEFAULT_TOL};
use crate::ck_cs::ROUNDING;
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::spaces::check_len;

/// `η'(ε) = coeff · ε²`, the slack accepted by [`bpb_into_linf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPrime {
    pub coeff: f64,
}

impl Default for EtaPrime {
    fn default() -> Self {
        EtaPrime { coeff: 0.25 }
    }
}

impl EtaPrime {
    pub fn eval(&self, epsilon: f64) -> f64 {
        self.coeff * epsilon * epsilon
    }

    /// Scalar accuracy whose admissible slack `ε_s²/2` equals `η'(ε)`.
    pub fn scalar_epsilon(&self, epsilon: f64) -> f64 {
        (2.0 * self.eval(epsilon)).sqrt()
    }
}

/// How [`scalar_bpb`] produced its answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarMethod {
    /// `x*` already norms `x0`.
    Unchanged,
    /// `y* = (x* + λ j(x0))/||x* + λ j(x0)||` with `y` its attaining point.
    DualPerturbation { lambda: f64 },
    /// Sup-normed space: mass of `x*` on badly aligned coordinates removed.
    Trimmed,
    /// `l1` space: `x*` rounded to `sgn(x0)` where nearly aligned.
    Rounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBpbResult {
    pub y: Vec<f64>,
    pub y_star: Vec<f64>,
    pub dist_point: f64,
    pub dist_functional: f64,
    /// `y*(y)`.
    pub value: f64,
    pub method: ScalarMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Given `x*` of unit dual norm and `x0` in the unit ball of `(R^n, norm)`
/// with `|1 - x*(x0)| < ε²/2`, `0 < ε < 1/2`, find unit `y`, `y*` with
/// `y*(y) = 1`, `||y - x0|| < ε + ε²` and `||y* - x*|| < ε`.
pub fn scalar_bpb(norm: NormKind, x_star: &[f64], x0: &[f64], epsilon: f64, tol: f64) -> Result<ScalarBpbResult> {
    const STAGE: &str = "scalar_bpb";
    check_len(x_star.len(), x0.len())?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must lie in (0, 1/2)")));
    }
    let dual = norm.dual();
    if (dual.norm(x_star) - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||x*|| = {} is not 1", dual.norm(x_star))));
    }
    if norm.norm(x0) > 1.0 + tol {
        return Err(BpbError::pre(STAGE, format!("||x0|| = {} exceeds 1", norm.norm(x0))));
    }
    let pairing = dot(x_star, x0);
    if (1.0 - pairing).abs() >= epsilon * epsilon / 2.0 {
        return Err(BpbError::pre(
            STAGE,
            format!("|1 - x*(x0)| = {:.6e} is not below epsilon^2/2", (1.0 - pairing).abs()),
        ));
    }

    let finish = |y: Vec<f64>, y_star: Vec<f64>, method: ScalarMethod| ScalarBpbResult {
        dist_point: norm.norm(&diff(&y, x0)),
        dist_functional: dual.norm(&diff(&y_star, x_star)),
        value: dot(&y_star, &y),
        y,
        y_star,
        method,
    };
    let accept = |r: &ScalarBpbResult| {
        r.dist_point < epsilon + epsilon * epsilon
            && r.dist_functional < epsilon
            && (r.value - 1.0).abs() <= tol
            && (norm.norm(&r.y) - 1.0).abs() <= tol
            && (dual.norm(&r.y_star) - 1.0).abs() <= tol
    };

    if (1.0 - pairing).abs() <= ROUNDING && (norm.norm(x0) - 1.0).abs() <= ROUNDING {
        let r = finish(x0.to_vec(), x_star.to_vec(), ScalarMethod::Unchanged);
        if accept(&r) {
            return Ok(r);
        }
    }

    let candidate = match norm {
        NormKind::Sup => {
            let y_raw: Vec<f64> = x_star
                .iter()
                .zip(x0)
                .map(|(&f, &x)| if f != 0.0 && (sgn(f) - x).abs() >= epsilon { 0.0 } else { f })
                .collect();
            let mass = dual.norm(&y_raw);
            if mass == 0.0 {
                None
            } else {
                let y_star: Vec<f64> = y_raw.iter().map(|v| v / mass).collect();
                let y = y_star
                    .iter()
                    .zip(x0)
                    .map(|(&f, &x)| if f != 0.0 { sgn(f) } else { x.clamp(-1.0, 1.0) })
                    .collect();
                Some(finish(y, y_star, ScalarMethod::Trimmed))
            }
        }
        NormKind::P(1.0) => {
            let good: Vec<bool> = x_star
                .iter()
                .zip(x0)
                .map(|(&f, &x)| x != 0.0 && sgn(x) * f > 1.0 - epsilon)
                .collect();
            let mass: f64 = x0.iter().zip(&good).filter(|(_, &g)| g).map(|(x, _)| x.abs()).sum();
            if mass == 0.0 {
                None
            } else {
                let y = x0.iter().zip(&good).map(|(&x, &g)| if g { x / mass } else { 0.0 }).collect();
                let y_star = x_star
                    .iter()
                    .zip(x0)
                    .zip(&good)
                    .map(|((&f, &x), &g)| if g { sgn(x) } else { f })
                    .collect();
                Some(finish(y, y_star, ScalarMethod::Rounded))
            }
        }
        _ => {
            let j = norm.norming_functional(x0);
            let lambdas =
                std::iter::once(0.0).chain((-12..=20).map(|k| epsilon / 4.0 * 2f64.powi(k)));
            lambdas
                .map(|lambda| {
                    let z: Vec<f64> = x_star.iter().zip(&j).map(|(a, b)| a + lambda * b).collect();
                    let zn = dual.norm(&z);
                    let y_star: Vec<f64> = z.iter().map(|v| v / zn).collect();
                    let y = norm.attaining_point(&y_star, None);
                    finish(y, y_star, ScalarMethod::DualPerturbation { lambda })
                })
                .find(|r| accept(r))
        }
    };
    match candidate {
        Some(r) if accept(&r) => Ok(r),
        Some(r) => Err(BpbError::post(
            STAGE,
            format!(
                "bounds missed: ||y - x0|| = {:.6e}, ||y* - x*|| = {:.6e}, y*(y) = {:.17e}",
                r.dist_point, r.dist_functional, r.value
            ),
        )),
        None => Err(BpbError::BudgetExhausted {
            stage: STAGE,
            detail: "no functional within the bounds".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinfCorrection {
    pub v: GeneralOperator,
    pub z0: Vec<f64>,
    /// Replaced row and the sign that made its pairing with `x0` positive.
    pub row: usize,
    pub sign: f64,
    pub scalar: ScalarBpbResult,
    pub certificate: BpbCertificate,
}

/// Correct `U: X -> l∞^n` (`||U|| = 1`) and unit `x0` with
/// `||U x0|| > 1 - η'(ε)`, `0 < ε <= 1/2`, by running [`scalar_bpb`] on the
/// row that peaks at `x0` and putting the corrected functional in its place.
pub fn bpb_into_linf(
    u: &GeneralOperator,
    x0: &[f64],
    epsilon: f64,
    eta_prime: &EtaPrime,
    tol: f64,
) -> Result<LinfCorrection> {
    const STAGE: &str = "bpb_into_linf";
    if !u.target_norm().is_sup() {
        return Err(BpbError::Unsupported(format!("target norm {} is not sup", u.target_norm())));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must lie in (0, 1/2]")));
    }
    check_len(u.source_dim(), x0.len())?;
    let norm = u.source_norm();
    let u_norm = u.operator_norm()?;
    if (u_norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||U|| = {u_norm} is not 1")));
    }
    if (norm.norm(x0) - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||x0|| = {} is not 1", norm.norm(x0))));
    }
    let image = u.apply(x0)?;
    let row = (0..image.len()).fold(0, |best, i| if image[i].abs() > image[best].abs() { i } else { best });
    let peak = image[row].abs();
    if peak <= 1.0 - eta_prime.eval(epsilon) {
        return Err(BpbError::pre(
            STAGE,
            format!("||U x0|| = {peak} is not above 1 - eta'(epsilon) = {}", 1.0 - eta_prime.eval(epsilon)),
        ));
    }
    let sign = sgn(image[row]);
    let dual = norm.dual();
    let signed: Vec<f64> = u.row(row).iter().map(|v| sign * v).collect();
    let row_norm = dual.norm(&signed);
    let x_star: Vec<f64> = signed.iter().map(|v| v / row_norm).collect();
    let scalar = scalar_bpb(norm, &x_star, x0, eta_prime.scalar_epsilon(epsilon), tol)?;

    let mut matrix = u.matrix().to_vec();
    matrix[row] = scalar.y_star.iter().map(|v| sign * v).collect();
    let v = GeneralOperator::new(matrix, norm, NormKind::Sup)?;
    let z0 = scalar.y.clone();

    let v_norm = v.operator_norm()?;
    let row_value = v.apply(&z0)?[row].abs();
    let certificate = BpbCertificate {
        witness: z0.clone(),
        attained_norm: v.image_norm(&z0)?,
        operator_norm: v_norm,
        dist_point: norm.norm(&diff(&z0, x0)),
        dist_operator: v.sub(u)?.operator_norm()?,
        epsilon,
        tol,
    };
    if (row_value - 1.0).abs() > tol {
        return Err(BpbError::post(STAGE, format!("|row(z0)| = {row_value} is not 1")));
    }
    let violations = certificate.violations();
    if !violations.is_empty() {
        return Err(BpbError::post(STAGE, violations.join("; ")));
    }
    Ok(LinfCorrection {
        v,
        z0,
        row,
        sign,
        scalar,
        certificate,
    })
}

/// How the truncation dimension was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationRule {
    /// From a `δ`-net of `T(B_X)` built on a grid of the source ball.
    Net,
    /// From the row norms: every dropped row has dual norm below `δ`, so
    /// the truncation moves each `T x` by less than `δ`.
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredualOptions {
    pub eta_prime: EtaPrime,
    pub tol: f64,
    /// `δ` as a fraction of its upper bound.
    pub delta_fraction: f64,
    /// Largest source-ball grid to enumerate before using [`TruncationRule::Tail`].
    pub max_grid: usize,
}

impl Default for PredualOptions {
    fn default() -> Self {
        PredualOptions {
            eta_prime: EtaPrime::default(),
            tol: DEFAULT_TOL,
            delta_fraction: 0.9,
            max_grid: 50_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredualParams {
    pub epsilon: f64,
    /// `min{ε/4, η'(ε/2)}`.
    pub eta: f64,
    pub delta: f64,
    pub eta_prime: EtaPrime,
}

impl PredualParams {
    /// Slack admitted for accuracy `epsilon`.
    pub fn eta_for(epsilon: f64, eta_prime: &EtaPrime) -> f64 {
        (epsilon / 4.0).min(eta_prime.eval(epsilon / 2.0))
    }

    /// `δ = fraction · min{ε/4, ||T x0|| - 1 + η'(ε/2)}/4`.
    pub fn new(epsilon: f64, image_norm: f64, opts: &PredualOptions) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must lie in (0, 1)")));
        }
        if !(opts.delta_fraction > 0.0 && opts.delta_fraction < 1.0) {
            return Err(BpbError::InvalidInput("delta_fraction must lie in (0, 1)".into()));
        }
        let room = (epsilon / 4.0).min(image_norm - 1.0 + opts.eta_prime.eval(epsilon / 2.0));
        Ok(PredualParams {
            epsilon,
            eta: Self::eta_for(epsilon, &opts.eta_prime),
            delta: opts.delta_fraction * room / 4.0,
            eta_prime: opts.eta_prime,
        })
    }
}

/// Measured terms of `||S - T|| <= ||V - R|| + ||R - PT|| + ||PT - T||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredualLedger {
    pub v_minus_r: f64,
    /// `1 - ||PT||`.
    pub r_minus_pt: f64,
    pub pt_minus_t: f64,
    /// `ε/2 + 8δ`.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredualResult {
    pub s: GeneralOperator,
    pub z0: Vec<f64>,
    pub certificate: BpbCertificate,
    pub params: PredualParams,
    pub slack: f64,
    pub rule: TruncationRule,
    /// Images `T x_i` of the source-ball net (empty for the tail rule).
    pub net: Vec<Vec<f64>>,
    /// Truncation dimension.
    pub m: usize,
    pub projection: GeneralOperator,
    pub r: GeneralOperator,
    pub inner: LinfCorrection,
    pub ledger: PredualLedger,
}

/// Coordinate truncation onto the first `m` of `n` coordinates.
pub fn truncation(n: usize, m: usize) -> GeneralOperator {
    let matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j && i < m { 1.0 } else { 0.0 }).collect())
        .collect();
    GeneralOperator::new(matrix, NormKind::Sup, NormKind::Sup).expect("square finite matrix")
}

/// A `radius`-net of the unit ball of `(R^d, norm)`: cubic grid points
/// scaled back into the ball. Returns `None` when it would exceed `max`
/// points.
pub fn source_ball_net(norm: NormKind, d: usize, radius: f64, max: usize) -> Option<Vec<Vec<f64>>> {
    // A ball point is within (h/2) d^(1/p) of a grid point, and rescaling a
    // grid point into the ball at most doubles that.
    let spread = match norm {
        NormKind::Sup => 1.0,
        other => (d as f64).powf(1.0 / other.exponent()),
    };
    let res = (spread / radius).floor() as usize + 1;
    let side = 2 * res + 1;
    let size = side.checked_pow(d as u32)?;
    if size > max {
        return None;
    }
    let h = 1.0 / res as f64;
    let mut out = Vec::with_capacity(size);
    for index in 0..size {
        let mut rest = index;
        let x: Vec<f64> = (0..d)
            .map(|_| {
                let k = (rest % side) as f64 - res as f64;
                rest /= side;
                k * h
            })
            .collect();
        let len = norm.norm(&x);
        out.push(if len > 1.0 { x.iter().map(|v| v / len).collect() } else { x });
    }
    Some(out)
}

/// Correct `T: X -> c0` (rows are the used coordinates, sup-normed,
/// `||T|| = 1`) and unit `x0` with `||T x0|| > 1 - min{ε/4, η'(ε/2)}` into a
/// finite-rank `S` and `z0` with `||S z0|| = ||S|| = 1`, `||S - T|| < ε` and
/// `||z0 - x0|| < ε`.
pub fn correct_predual(t: &GeneralOperator, x0: &[f64], epsilon: f64, opts: &PredualOptions) -> Result<PredualResult> {
    const STAGE: &str = "correct_predual";
    let tol = opts.tol;
    if !t.target_norm().is_sup() {
        return Err(BpbError::Unsupported(format!("target norm {} is not sup", t.target_norm())));
    }
    check_len(t.source_dim(), x0.len())?;
    let norm = t.source_norm();
    let t_norm = t.operator_norm()?;
    if (t_norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||T|| = {t_norm} is not 1")));
    }
    if (norm.norm(x0) - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||x0|| = {} is not 1", norm.norm(x0))));
    }
    let image_norm = t.image_norm(x0)?;
    let slack = 1.0 - image_norm;
    let eta = PredualParams::eta_for(epsilon, &opts.eta_prime);
    if slack >= eta {
        return Err(BpbError::pre(
            STAGE,
            format!("1 - ||T x0|| = {slack:.6e} is not below eta = {eta:.6e}"),
        ));
    }
    let params = PredualParams::new(epsilon, image_norm, opts)?;
    let delta = params.delta;

    let dual = norm.dual();
    let n = t.target_dim();
    let (rule, net, m) = match source_ball_net(norm, t.source_dim(), delta, opts.max_grid) {
        Some(points) => {
            let images: Vec<Vec<f64>> = points.iter().map(|x| t.apply(x)).collect::<Result<_>>()?;
            let m = (0..=n)
                .find(|&m| images.iter().all(|y| y[m..].iter().all(|v| v.abs() < delta)))
                .expect("m = n always qualifies");
            (TruncationRule::Net, images, m)
        }
        None => {
            let m = (0..=n)
                .find(|&m| t.matrix()[m..].iter().all(|r| dual.norm(r) < delta))
                .expect("m = n always qualifies");
            (TruncationRule::Tail, Vec::new(), m)
        }
    };
    if m == 0 {
        return Err(BpbError::post(STAGE, "truncation dropped every coordinate"));
    }
    let projection = truncation(n, m);
    let pt = projection.compose(t)?;
    let pt_minus_t = pt.sub(t)?.operator_norm()?;
    if pt_minus_t >= 4.0 * delta {
        return Err(BpbError::post(STAGE, format!("||PT - T|| = {pt_minus_t} >= 4 delta")));
    }
    let pt_norm = pt.operator_norm()?;
    if pt_norm <= 1.0 - 4.0 * delta {
        return Err(BpbError::post(STAGE, format!("||PT|| = {pt_norm} <= 1 - 4 delta")));
    }
    let r = GeneralOperator::new(
        pt.matrix()[..m].iter().map(|row| row.iter().map(|v| v / pt_norm).collect()).collect(),
        norm,
        NormKind::Sup,
    )?;
    let inner = bpb_into_linf(&r, x0, epsilon / 2.0, &opts.eta_prime, tol)?;

    let mut s_matrix = inner.v.matrix().to_vec();
    s_matrix.resize(n, vec![0.0; t.source_dim()]);
    let s = GeneralOperator::new(s_matrix, norm, NormKind::Sup)?;
    let z0 = inner.z0.clone();

    let r_embedded = GeneralOperator::new(
        {
            let mut rows = r.matrix().to_vec();
            rows.resize(n, vec![0.0; t.source_dim()]);
            rows
        },
        norm,
        NormKind::Sup,
    )?;
    let ledger = PredualLedger {
        v_minus_r: inner.certificate.dist_operator,
        r_minus_pt: r_embedded.sub(&pt)?.operator_norm()?,
        pt_minus_t,
        bound: epsilon / 2.0 + 8.0 * delta,
    };
    if ledger.bound >= epsilon {
        return Err(BpbError::post(STAGE, format!("ledger bound {} >= epsilon", ledger.bound)));
    }
    let certificate = BpbCertificate {
        witness: z0.clone(),
        attained_norm: s.image_norm(&z0)?,
        operator_norm: s.operator_norm()?,
        dist_point: norm.norm(&diff(&z0, x0)),
        dist_operator: s.sub(t)?.operator_norm()?,
        epsilon,
        tol,
    };
    let violations = certificate.violations();
    if !violations.is_empty() {
        return Err(BpbError::post(STAGE, violations.join("; ")));
    }
    Ok(PredualResult {
        s,
        z0,
        certificate,
        params,
        slack,
        rule,
        net,
        m,
        projection,
        r,
        inner,
        ledger,
    })
}
