//! Norm-attaining corrections for operators `C(K) -> C(S)` on finite `K, S`.
//!
//! An operator is a [`Kernel`]: row `s` is the measure `f -> (T f)(s)`. The
//! correction runs in three stages:
//!
//! 1. [`flatten_peak`] pushes the near-norming function to `±1` wherever it
//!    is already close to `±1`, and clears the mass that the rows near the
//!    peak put on the remaining "flat" set `V`.
//! 2. [`jw_step`] is iterated with geometrically shrinking budgets `r^k δ`;
//!    each step lowers the attainment defect `||μ|| - <h0, μ(s)>` below the
//!    next budget while moving the kernel by at most that budget.
//! 3. [`finish_step`] closes the remaining (tiny) defect exactly, and the
//!    result is normalised.
//!
//! With `η(ε) = ε²/432` as admissible slack, the output is within `ε` of the
//! input in both the operator and the point.

use serde::Serialize;

use crate::certificate::{BpbCertificate, DEFAULT_TOL};
use crate::error::{BpbError, Result};
use crate::spaces::{hahn_split, pair_of, tv_norm_of, Func, Kernel};

/// Relative shrink applied to every step budget so the step bounds survive
/// floating-point rounding.
const BUDGET_SHRINK: f64 = 1e-9;

/// Absolute slack for re-checking inequalities that hold exactly in real
/// arithmetic.
pub(crate) const ROUNDING: f64 = 1e-12;

/// Largest slack `1 - ||T f0||` the driver accepts for a given `epsilon`.
pub fn eta(epsilon: f64) -> f64 {
    epsilon * epsilon / 432.0
}

/// Cutoffs for [`flatten_peak`]: `1 - δ < a < b < c = 1 - δ/4`, equispaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffParams {
    pub delta: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CutoffParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BpbError::InvalidInput(format!("delta {delta} must lie in (0, 1)")));
        }
        Ok(CutoffParams {
            delta,
            alpha: delta * delta / 12.0,
            a: 1.0 - 0.75 * delta,
            b: 1.0 - 0.5 * delta,
            c: 1.0 - 0.25 * delta,
        })
    }
}

/// Intermediate sets and cutoff functions built by [`flatten_peak`].
#[derive(Debug, Clone, Serialize)]
pub struct FlattenTrace {
    /// Hahn decomposition of the peak row.
    pub k_plus: Vec<usize>,
    pub k_minus: Vec<usize>,
    /// `{f0 > b}` and `{f0 < -b}`.
    pub o_plus: Vec<usize>,
    pub o_minus: Vec<usize>,
    /// `{|f0| > a}`, `{|f0| > c}`.
    pub w_a: Vec<usize>,
    pub w_c: Vec<usize>,
    /// `(K+ ∩ {f0 > c}) ∪ (K- ∩ {f0 < -c})`.
    pub d_c: Vec<usize>,
    /// Indicator of `{|f0| > b}`.
    pub u: Func,
    /// Indicator of `V`.
    pub f: Func,
    /// Indicator of `U` on the target points.
    pub g: Func,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlattenOutput {
    pub mu_prime: Kernel,
    /// Target points whose rows were cleared on `V`.
    pub u_set: Vec<usize>,
    /// Source points where `h0` was left unflattened.
    pub v_set: Vec<usize>,
    pub h0: Func,
    pub params: CutoffParams,
    pub trace: FlattenTrace,
}

fn members(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

fn mask_of(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in set {
        *mask
            .get_mut(i)
            .ok_or_else(|| BpbError::InvalidInput(format!("index {i} outside 0..{n}")))? = true;
    }
    Ok(mask)
}

/// Flatten a near-norming function at a peak row.
///
/// Requires `||mu|| = 1` (within `tol`), `||f0|| = 1` and
/// `<f0, mu(s0)> > 1 - δ²/12`. Returns `h0`, `U`, `V` and `mu'` with
///
/// * `mu'(s)` vanishes on `V` for `s ∈ U`;
/// * `<h0, mu'(s)> > ||mu'|| - δ` for `s ∈ U`;
/// * `||h0 - f0|| < δ`, `||h0|| = 1`, `|h0| = 1` off `V`;
/// * `||mu' - mu|| < δ`.
///
/// The thresholds defining `U` use `||mu||` where the exact construction
/// uses `1`; the two agree up to `tol` and the former keeps the bounds exact
/// under rounding.
pub fn flatten_peak(mu: &Kernel, s0: usize, f0: &Func, delta: f64, tol: f64) -> Result<FlattenOutput> {
    const STAGE: &str = "flatten_peak";
    let params = CutoffParams::new(delta)?;
    let (m, n) = (mu.target_dim(), mu.source_dim());
    if s0 >= m {
        return Err(BpbError::InvalidInput(format!("peak row {s0} outside 0..{m}")));
    }
    crate::spaces::check_len(n, f0.len())?;

    let norm = mu.norm();
    if (norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||mu|| = {norm} is not 1")));
    }
    if (f0.sup_norm() - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||f0|| = {} is not 1", f0.sup_norm())));
    }
    let peak = pair_of(f0.values(), mu.row(s0));
    if peak <= 1.0 - params.alpha {
        return Err(BpbError::pre(
            STAGE,
            format!("<f0, mu(s0)> = {peak} is not above 1 - delta^2/12 = {}", 1.0 - params.alpha),
        ));
    }

    let fv = f0.values();
    let (k_plus, k_minus) = hahn_split(&mu.row_measure(s0));
    let in_k_plus = mask_of(n, &k_plus)?;
    let above = |x: f64| -> Vec<usize> { (0..n).filter(|&t| fv[t] > x).collect() };
    let below = |x: f64| -> Vec<usize> { (0..n).filter(|&t| fv[t] < -x).collect() };
    let outside = |x: f64| -> Vec<usize> { (0..n).filter(|&t| fv[t].abs() > x).collect() };

    let o_plus = above(params.b);
    let o_minus = below(params.b);
    let w_a = outside(params.a);
    let w_c = outside(params.c);
    let d_c: Vec<usize> = w_c
        .iter()
        .copied()
        .filter(|&t| if in_k_plus[t] { fv[t] > params.c } else { fv[t] < -params.c })
        .collect();

    // u = 1 on {|f0| > b}; h0 = sgn(f0) there and f0 elsewhere.
    let u_mask: Vec<bool> = fv.iter().map(|v| v.abs() > params.b).collect();
    let h0_values: Vec<f64> = fv
        .iter()
        .zip(&u_mask)
        .map(|(&v, &on)| if on { v.signum() } else { v })
        .collect();
    let v_mask: Vec<bool> = u_mask.iter().map(|on| !on).collect();
    let w_c_mask = mask_of(n, &w_c)?;

    // h0 (1 - f): h0 off V, zero on V.
    let h0_off_v: Vec<f64> = h0_values
        .iter()
        .zip(&v_mask)
        .map(|(&h, &in_v)| if in_v { 0.0 } else { h })
        .collect();
    let threshold = norm - delta;
    let g_mask: Vec<bool> = (0..m)
        .map(|s| {
            let row = mu.row(s);
            let on_w_c: f64 = (0..n).filter(|&t| w_c_mask[t]).map(|t| row[t].abs()).sum();
            pair_of(&h0_off_v, row) > threshold && on_w_c > threshold
        })
        .collect();
    if !g_mask[s0] {
        return Err(BpbError::post(STAGE, format!("peak row {s0} did not qualify for U")));
    }

    let mut mu_prime = mu.clone();
    for (s, row) in mu_prime.rows_mut().iter_mut().enumerate() {
        if g_mask[s] {
            for (t, x) in row.iter_mut().enumerate() {
                if v_mask[t] {
                    *x = 0.0;
                }
            }
        }
    }

    let h0 = Func::new(h0_values)?;
    let u_set = members(&g_mask);
    let v_set = members(&v_mask);
    let out = FlattenOutput {
        trace: FlattenTrace {
            k_plus,
            k_minus,
            o_plus,
            o_minus,
            w_a,
            w_c,
            d_c,
            u: Func::new(u_mask.iter().map(|&b| b as u8 as f64).collect())?,
            f: Func::new(v_mask.iter().map(|&b| b as u8 as f64).collect())?,
            g: Func::new(g_mask.iter().map(|&b| b as u8 as f64).collect())?,
        },
        mu_prime,
        u_set,
        v_set,
        h0,
        params,
    };
    check_flatten(mu, f0, &out)?;
    Ok(out)
}

fn check_flatten(mu: &Kernel, f0: &Func, out: &FlattenOutput) -> Result<()> {
    const STAGE: &str = "flatten_peak";
    let delta = out.params.delta;
    let new_norm = out.mu_prime.norm();
    for &s in &out.u_set {
        let row = out.mu_prime.row(s);
        if out.v_set.iter().any(|&t| row[t] != 0.0) {
            return Err(BpbError::post(STAGE, format!("row {s} keeps mass on V")));
        }
        let value = pair_of(out.h0.values(), row);
        if value <= new_norm - delta {
            return Err(BpbError::post(STAGE, format!("row {s}: <h0, mu'(s)> = {value} too small")));
        }
    }
    let moved = out.h0.sub(f0)?.sup_norm();
    if moved >= delta {
        return Err(BpbError::post(STAGE, format!("||h0 - f0|| = {moved} >= delta")));
    }
    if out.h0.sup_norm() != 1.0 {
        return Err(BpbError::post(STAGE, "||h0|| != 1"));
    }
    let v_mask = mask_of(out.h0.len(), &out.v_set)?;
    if out.h0.values().iter().zip(&v_mask).any(|(h, &in_v)| !in_v && h.abs() != 1.0) {
        return Err(BpbError::post(STAGE, "|h0| != 1 off V"));
    }
    let dist = out.mu_prime.sub(mu)?.norm();
    if dist >= delta {
        return Err(BpbError::post(STAGE, format!("||mu' - mu|| = {dist} >= delta")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct JwStep {
    pub mu_prime: Kernel,
    /// Row of `U` carrying the attainment after the step.
    pub s1: usize,
    /// Blend weight toward the fully aligned row.
    pub theta: f64,
    /// `<h0, mu'(s1)>`.
    pub value: f64,
    /// Rows scaled down to the cap.
    pub capped: Vec<usize>,
}

struct StepInput<'a> {
    mu: &'a Kernel,
    in_u: Vec<bool>,
    in_v: Vec<bool>,
    h0: &'a [f64],
}

fn step_input<'a>(
    stage: &'static str,
    mu: &'a Kernel,
    u_set: &[usize],
    v_set: &[usize],
    h0: &'a Func,
) -> Result<StepInput<'a>> {
    let (m, n) = (mu.target_dim(), mu.source_dim());
    crate::spaces::check_len(n, h0.len())?;
    if u_set.is_empty() {
        return Err(BpbError::pre(stage, "U is empty"));
    }
    let in_u = mask_of(m, u_set)?;
    let in_v = mask_of(n, v_set)?;
    let h = h0.values();
    if h0.sup_norm() != 1.0 {
        return Err(BpbError::pre(stage, "||h0|| != 1"));
    }
    if (0..n).any(|t| !in_v[t] && h[t].abs() != 1.0) {
        return Err(BpbError::pre(stage, "|h0| != 1 off V"));
    }
    for &s in u_set {
        if v_set.iter().any(|&t| mu.row(s)[t] != 0.0) {
            return Err(BpbError::pre(stage, format!("row {s} of U has mass on V")));
        }
    }
    Ok(StepInput { mu, in_u, in_v, h0: h })
}

impl StepInput<'_> {
    /// `argmax_{s ∈ U} <h0, mu(s)>`, first index on ties.
    fn best_row(&self) -> (usize, f64) {
        let mut best: Option<(usize, f64)> = None;
        for s in (0..self.mu.target_dim()).filter(|&s| self.in_u[s]) {
            let v = pair_of(self.h0, self.mu.row(s));
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s, v));
            }
        }
        best.expect("U is non-empty")
    }

    /// The row of `s` with every entry turned to the sign of `h0`.
    fn aligned(&self, s: usize) -> Vec<f64> {
        self.mu
            .row(s)
            .iter()
            .zip(self.h0)
            .zip(&self.in_v)
            .map(|((x, h), &in_v)| if in_v { 0.0 } else { h * x.abs() })
            .collect()
    }

    /// Blend row `s1` toward its aligned version with weight `theta` and
    /// scale every other row down to total variation at most `cap(value)`.
    fn apply(&self, s1: usize, theta: f64, cap: impl Fn(f64) -> f64) -> JwStep {
        let nu = self.aligned(s1);
        let row: Vec<f64> = if theta >= 1.0 {
            nu
        } else {
            self.mu
                .row(s1)
                .iter()
                .zip(&nu)
                .map(|(x, y)| (1.0 - theta) * x + theta * y)
                .collect()
        };
        let value = pair_of(self.h0, &row);
        let limit = cap(value);
        let mut mu_prime = self.mu.clone();
        let mut capped = Vec::new();
        for (s, r) in mu_prime.rows_mut().iter_mut().enumerate() {
            if s == s1 {
                r.clone_from(&row);
                continue;
            }
            let tv = tv_norm_of(r);
            if tv > limit {
                let k = limit / tv;
                r.iter_mut().for_each(|x| *x *= k);
                capped.push(s);
            }
        }
        JwStep {
            mu_prime,
            s1,
            theta,
            value,
            capped,
        }
    }
}

/// One contraction step ("align-and-cap").
///
/// With `a = max_{s ∈ U} <h0, mu(s)>` attained at `s1` and `N = ||mu(s1)||`,
/// the row `mu(s1)` is blended toward `ν = h0 |mu(s1)|` (which pairs with `h0`
/// to exactly `N`) with weight `θ = min(1, rδ/(N - a))`, so it moves by
/// `min(N - a, rδ)` and its value rises to `a' = a + min(N - a, rδ)`. Every
/// other row is then capped at total variation `a' + rδ`.
///
/// Why this meets the contract when `a >= ||mu|| - δ` and `r > 2/3`:
/// if `θ < 1` then `a' = a + rδ` and the cap `a + 2rδ` exceeds `||mu||`, so
/// nothing is capped, and `N <= a + δ < a' + rδ`; if `θ = 1` then `a' = N`
/// and a capped row loses at most `||mu|| - N - rδ <= (1 - r)δ < rδ`. Either
/// way every row moves by at most `rδ` and `||mu'|| <= a' + rδ`.
pub fn jw_step(
    mu: &Kernel,
    u_set: &[usize],
    v_set: &[usize],
    h0: &Func,
    delta: f64,
    r: f64,
) -> Result<JwStep> {
    const STAGE: &str = "jw_step";
    if !(r > 2.0 / 3.0 && r < 1.0) {
        return Err(BpbError::InvalidInput(format!("r = {r} must lie in (2/3, 1)")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(BpbError::InvalidInput(format!("delta = {delta} must be positive")));
    }
    let input = step_input(STAGE, mu, u_set, v_set, h0)?;
    let norm = mu.norm();
    let (s1, a) = input.best_row();
    if a < norm - delta - ROUNDING {
        return Err(BpbError::pre(
            STAGE,
            format!("best value {a} is below ||mu|| - delta = {}", norm - delta),
        ));
    }

    let budget = r * delta * (1.0 - BUDGET_SHRINK);
    let gap = (tv_norm_of(mu.row(s1)) - a).max(0.0);
    let theta = if gap <= budget { 1.0 } else { budget / gap };
    let step = input.apply(s1, theta, |value| value + budget);

    // i) is preserved exactly: aligned rows are zero on V and capping scales.
    let new_norm = step.mu_prime.norm();
    if step.value < new_norm - r * delta {
        return Err(BpbError::post(
            STAGE,
            format!("<h0, mu'(s1)> = {} < ||mu'|| - r delta = {}", step.value, new_norm - r * delta),
        ));
    }
    let moved = step.mu_prime.sub(mu)?.norm();
    if moved > r * delta {
        return Err(BpbError::post(STAGE, format!("||mu' - mu|| = {moved} > r delta")));
    }
    check_cleared(STAGE, &step.mu_prime, &input)?;
    Ok(step)
}

fn check_cleared(stage: &'static str, mu: &Kernel, input: &StepInput) -> Result<()> {
    for s in (0..mu.target_dim()).filter(|&s| input.in_u[s]) {
        let row = mu.row(s);
        if (0..row.len()).any(|t| input.in_v[t] && row[t] != 0.0) {
            return Err(BpbError::post(stage, format!("row {s} of U gained mass on V")));
        }
    }
    Ok(())
}

/// Final step: replace the best row of `U` by its aligned version and cap
/// every other row at exactly its value. The result attains its norm at
/// `h0`; the kernel moves by at most the current defect
/// `||mu|| - max_{s ∈ U} <h0, mu(s)>`.
pub fn finish_step(mu: &Kernel, u_set: &[usize], v_set: &[usize], h0: &Func) -> Result<JwStep> {
    const STAGE: &str = "finish_step";
    let input = step_input(STAGE, mu, u_set, v_set, h0)?;
    let (s1, a) = input.best_row();
    let defect = (mu.norm() - a).max(0.0);
    let step = input.apply(s1, 1.0, |value| value);
    check_cleared(STAGE, &step.mu_prime, &input)?;
    let moved = step.mu_prime.sub(mu)?.norm();
    if moved > defect + ROUNDING {
        return Err(BpbError::post(STAGE, format!("moved {moved} > defect {defect}")));
    }
    Ok(step)
}

/// `max_{s ∈ U} <h0, mu(s)>` and the attainment defect `||mu||` minus it.
pub fn attainment_defect(mu: &Kernel, u_set: &[usize], h0: &Func) -> f64 {
    let best = u_set
        .iter()
        .map(|&s| pair_of(h0.values(), mu.row(s)))
        .fold(f64::NEG_INFINITY, f64::max);
    mu.norm() - best
}

/// Budgets `r^k δ` for the contraction steps. `max_steps` is the first `N`
/// with `r^N δ <= tol (1 - r)`, so the tail the finishing step replaces is
/// below `tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSchedule {
    pub r: f64,
    pub delta0: f64,
    pub max_steps: usize,
    pub step_deltas: Vec<f64>,
}

impl IterationSchedule {
    pub fn new(r: f64, delta0: f64, tol: f64) -> Result<Self> {
        if !(r > 2.0 / 3.0 && r < 1.0) {
            return Err(BpbError::InvalidInput(format!("r = {r} must lie in (2/3, 1)")));
        }
        if !(delta0 > 0.0 && tol > 0.0) {
            return Err(BpbError::InvalidInput("delta0 and tol must be positive".into()));
        }
        let ratio = tol * (1.0 - r) / delta0;
        let max_steps = if ratio >= 1.0 {
            0
        } else {
            (ratio.ln() / r.ln()).ceil() as usize
        };
        let step_deltas = (0..max_steps).map(|k| delta0 * r.powi(k as i32)).collect();
        Ok(IterationSchedule {
            r,
            delta0,
            max_steps,
            step_deltas,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkCsOptions {
    pub tol: f64,
}

impl Default for CkCsOptions {
    fn default() -> Self {
        CkCsOptions { tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CkCsResult {
    /// Corrected kernel, unit norm, attaining at `h0`.
    pub s: Kernel,
    /// Norming function (already sign-corrected back to the input's orientation).
    pub h0: Func,
    pub certificate: BpbCertificate,
    pub steps_used: usize,
    pub schedule: IterationSchedule,
    pub epsilon: f64,
    /// `1 - ||T f0||` measured on the normalised input.
    pub slack: f64,
    pub delta: f64,
    /// True when `-f0` was corrected instead of `f0`.
    pub flipped: bool,
    /// Row of the normalised input where `|T f0|` peaks.
    pub s0: usize,
    /// `||T||` of the input before normalisation.
    pub input_norm: f64,
    pub flatten: FlattenOutput,
    /// Attainment defect after flattening and after each contraction step.
    pub defects: Vec<f64>,
    /// `||mu_{k+1} - mu_k||` for each contraction step.
    pub movements: Vec<f64>,
    pub flatten_movement: f64,
    pub finish_movement: f64,
    /// Defect after the finishing step, before normalisation.
    pub final_defect: f64,
}

impl CkCsResult {
    /// Total kernel movement from the flattened kernel, finishing step included.
    pub fn iterate_movement(&self) -> f64 {
        self.movements.iter().sum::<f64>() + self.finish_movement
    }
}

/// `δ` and `r` for slack `σ < ε²/432`: `δ` is the midpoint of
/// `(sqrt(12σ), ε/6)` and `r` the midpoint of `(2/3, 1 - 2δ/ε)`, so that
/// `σ < δ²/12` and `δ < ε(1 - r)/2`.
pub fn schedule_parameters(epsilon: f64, slack: f64) -> (f64, f64) {
    let delta = ((12.0 * slack.max(0.0)).sqrt() + epsilon / 6.0) / 2.0;
    let r = (2.0 / 3.0 + 1.0 - 2.0 * delta / epsilon) / 2.0;
    (delta, r)
}

/// Correct `T` and a near-norming `f0` into a norm-attaining pair.
///
/// Requires `||T|| = 1` and `||f0|| = 1` within `tol`, `0 < ε < 2`, and
/// `||T f0|| > 1 - ε²/432`.
pub fn correct_ck_cs(t: &Kernel, f0: &Func, epsilon: f64, opts: &CkCsOptions) -> Result<CkCsResult> {
    const STAGE: &str = "correct_ck_cs";
    let tol = opts.tol;
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must lie in (0, 2)")));
    }
    crate::spaces::check_len(t.source_dim(), f0.len())?;
    let input_norm = t.norm();
    if (input_norm - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||T|| = {input_norm} is not 1")));
    }
    if (f0.sup_norm() - 1.0).abs() > tol {
        return Err(BpbError::pre(STAGE, format!("||f0|| = {} is not 1", f0.sup_norm())));
    }
    let t0 = if input_norm == 1.0 { t.clone() } else { t.scale(1.0 / input_norm) };

    let image = t0.apply(f0)?;
    let s0 = (0..image.len())
        .fold(0, |best, s| if image.values()[s].abs() > image.values()[best].abs() { s } else { best });
    let peak = image.values()[s0];
    let slack = (1.0 - peak.abs()).max(0.0);
    if slack >= eta(epsilon) {
        return Err(BpbError::pre(
            STAGE,
            format!("slack 1 - ||T f0|| = {slack:.6e} is not below eta = {:.6e}", eta(epsilon)),
        ));
    }
    let flipped = peak < 0.0;
    let f = if flipped { f0.neg() } else { f0.clone() };

    let (delta, r) = schedule_parameters(epsilon, slack);
    let schedule = IterationSchedule::new(r, delta, tol)?;

    let flatten = flatten_peak(&t0, s0, &f, delta, tol)?;
    let flatten_movement = flatten.mu_prime.sub(&t0)?.norm();
    let (u_set, v_set, h0) = (&flatten.u_set, &flatten.v_set, &flatten.h0);

    let mut mu = flatten.mu_prime.clone();
    let mut defects = vec![attainment_defect(&mu, u_set, h0)];
    let mut movements = Vec::with_capacity(schedule.max_steps);
    for &step_delta in &schedule.step_deltas {
        let step = jw_step(&mu, u_set, v_set, h0, step_delta, r)?;
        movements.push(step.mu_prime.sub(&mu)?.norm());
        mu = step.mu_prime;
        defects.push(attainment_defect(&mu, u_set, h0));
    }
    let finish = finish_step(&mu, u_set, v_set, h0)?;
    let finish_movement = finish.mu_prime.sub(&mu)?.norm();
    mu = finish.mu_prime;
    let final_defect = attainment_defect(&mu, u_set, h0);

    let total = movements.iter().sum::<f64>() + finish_movement;
    if total > delta / (1.0 - r) {
        return Err(BpbError::post(
            STAGE,
            format!("iterates moved {total} > delta/(1-r) = {}", delta / (1.0 - r)),
        ));
    }

    let final_norm = mu.norm();
    if final_norm == 0.0 {
        return Err(BpbError::post(STAGE, "corrected kernel vanished"));
    }
    // An untouched kernel already attains at h0; keep the input as given.
    let s = if mu == t0 { t.clone() } else { mu.scale(1.0 / final_norm) };
    let witness = if flipped { h0.neg() } else { h0.clone() };
    let certificate = BpbCertificate {
        attained_norm: s.apply(&witness)?.sup_norm(),
        operator_norm: s.norm(),
        dist_point: witness.sub(f0)?.sup_norm(),
        dist_operator: s.sub(t)?.norm(),
        witness: witness.values().to_vec(),
        epsilon,
        tol,
    };
    let violations = certificate.violations();
    if !violations.is_empty() {
        return Err(BpbError::post(STAGE, violations.join("; ")));
    }
    Ok(CkCsResult {
        s,
        h0: witness,
        certificate,
        steps_used: schedule.max_steps,
        schedule,
        epsilon,
        slack,
        delta,
        flipped,
        s0,
        input_norm,
        flatten,
        defects,
        movements,
        flatten_movement,
        finish_movement,
        final_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(rows: &[&[f64]]) -> Kernel {
        Kernel::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn cutoffs_are_ordered() {
        let p = CutoffParams::new(0.3).unwrap();
        assert_eq!(p.alpha, 0.3 * 0.3 / 12.0);
        assert!(1.0 - p.delta < p.a && p.a < p.b && p.b < p.c && p.c < 1.0);
        assert_eq!(p.c, 1.0 - 0.3 / 4.0);
        assert!(CutoffParams::new(1.0).is_err());
        assert!(CutoffParams::new(0.0).is_err());
    }

    #[test]
    fn flatten_is_identity_on_sign_vectors() {
        let mu = kernel(&[&[1.0, 0.0]]);
        let f0 = Func::new(vec![1.0, 1.0]).unwrap();
        let out = flatten_peak(&mu, 0, &f0, 0.5, DEFAULT_TOL).unwrap();
        assert_eq!(out.h0, f0);
        assert!(out.v_set.is_empty());
        assert_eq!(out.mu_prime, mu);
        assert_eq!(out.u_set, vec![0]);
    }

    #[test]
    fn flatten_threshold_is_delta_squared_over_twelve() {
        let delta: f64 = 0.3;
        let mu = kernel(&[&[1.0, 0.0]]);
        // <f0, mu(0)> = f0(0); sits exactly on the threshold.
        let at = Func::new(vec![1.0 - delta * delta / 12.0, 1.0]).unwrap();
        let err = flatten_peak(&mu, 0, &at, delta, DEFAULT_TOL).unwrap_err();
        assert!(err.is_precondition(), "{err}");
        let above = Func::new(vec![1.0 - delta * delta / 13.0, 1.0]).unwrap();
        assert!(flatten_peak(&mu, 0, &above, delta, DEFAULT_TOL).is_ok());
    }

    #[test]
    fn flatten_rejects_unnormalised_kernel() {
        let mu = kernel(&[&[0.5, 0.0]]);
        let f0 = Func::new(vec![1.0, 1.0]).unwrap();
        assert!(flatten_peak(&mu, 0, &f0, 0.5, DEFAULT_TOL).unwrap_err().is_precondition());
    }

    #[test]
    fn flatten_clears_flat_points() {
        // Second point carries a little mass where f0 is far from ±1.
        let mu = kernel(&[&[0.99, 0.01], &[0.2, -0.7]]);
        let f0 = Func::new(vec![1.0, 0.2]).unwrap();
        let delta = 0.5;
        let out = flatten_peak(&mu, 0, &f0, delta, DEFAULT_TOL).unwrap();
        assert_eq!(out.v_set, vec![1]);
        assert_eq!(out.u_set, vec![0]);
        assert_eq!(out.mu_prime.row(0), &[0.99, 0.0]);
        assert_eq!(out.mu_prime.row(1), mu.row(1));
        assert_eq!(out.h0.values(), &[1.0, 0.2]);
    }

    #[test]
    fn jw_step_keeps_attaining_kernel() {
        let mu = kernel(&[&[0.6, 0.4], &[0.3, 0.5]]);
        let h0 = Func::new(vec![1.0, 1.0]).unwrap();
        let step = jw_step(&mu, &[0, 1], &[], &h0, 0.1, 0.75).unwrap();
        assert_eq!(step.mu_prime, mu);
        assert_eq!(step.s1, 0);
    }

    #[test]
    fn jw_step_rejects_bad_rate() {
        let mu = kernel(&[&[1.0]]);
        let h0 = Func::new(vec![1.0]).unwrap();
        assert!(jw_step(&mu, &[0], &[], &h0, 0.1, 0.6).is_err());
        assert!(jw_step(&mu, &[0], &[], &h0, 0.1, 1.0).is_err());
    }

    #[test]
    fn jw_step_rejects_unmet_hypothesis() {
        let mu = kernel(&[&[0.5, -0.5], &[1.0, 0.0]]);
        let h0 = Func::new(vec![1.0, 1.0]).unwrap();
        // best value over U = {0} is 0, far below ||mu|| - delta.
        let err = jw_step(&mu, &[0], &[], &h0, 0.1, 0.75).unwrap_err();
        assert!(err.is_precondition());
        // row 1 in U has mass on V = {0}
        let h1 = Func::new(vec![0.5, 1.0]).unwrap();
        assert!(jw_step(&mu, &[1], &[0], &h1, 0.1, 0.75).unwrap_err().is_precondition());
    }

    #[test]
    fn jw_step_partial_blend() {
        // a = 0.8, N = 1.0, gap 0.2 > r delta = 0.075, so theta < 1.
        let mu = kernel(&[&[0.9, -0.1], &[0.5, 0.5]]);
        let h0 = Func::new(vec![1.0, 1.0]).unwrap();
        let step = jw_step(&mu, &[0], &[], &h0, 0.2, 0.75).unwrap();
        assert!(step.theta < 1.0);
        assert!((step.value - (0.8 + 0.15 * (1.0 - BUDGET_SHRINK))).abs() < 1e-12);
        assert!(step.capped.is_empty());
    }

    #[test]
    fn schedule_parameters_respect_constraints() {
        for &eps in &[0.01, 0.25, 0.5, 1.0, 1.9] {
            for frac in [0.0, 0.3, 0.999] {
                let slack = frac * eta(eps);
                let (delta, r) = schedule_parameters(eps, slack);
                assert!(slack < delta * delta / 12.0);
                assert!(delta < eps / 6.0);
                assert!(r > 2.0 / 3.0 && r < 1.0);
                assert!(delta < eps * (1.0 - r) / 2.0);
            }
        }
    }

    #[test]
    fn schedule_tail_is_below_tolerance() {
        let s = IterationSchedule::new(0.75, 0.05, 1e-9).unwrap();
        let n = s.max_steps as i32;
        assert!(0.05 * 0.75f64.powi(n) <= 1e-9 * 0.25);
        assert!(0.05 * 0.75f64.powi(n - 1) > 1e-9 * 0.25);
        assert_eq!(s.step_deltas.len(), s.max_steps);
    }

    #[test]
    fn eta_value() {
        assert!((eta(0.5) - 5.787037037037037e-4).abs() < 1e-15);
    }

    #[test]
    fn attaining_input_is_returned_unchanged() {
        let t = kernel(&[&[0.6, 0.4], &[0.3, 0.5]]);
        let f0 = Func::new(vec![1.0, 1.0]).unwrap();
        let res = correct_ck_cs(&t, &f0, 0.5, &CkCsOptions::default()).unwrap();
        assert_eq!(res.s, t);
        assert_eq!(res.h0, f0);
        assert_eq!(res.certificate.dist_point, 0.0);
        assert_eq!(res.certificate.dist_operator, 0.0);
    }

    #[test]
    fn negative_peak_is_flipped() {
        let t = kernel(&[&[0.6, 0.4], &[0.3, 0.5]]);
        let f0 = Func::new(vec![-1.0, -0.999]).unwrap();
        let res = correct_ck_cs(&t, &f0, 0.5, &CkCsOptions::default()).unwrap();
        assert!(res.flipped);
        assert!(res.certificate.is_valid());
        assert!(res.h0.values().iter().all(|&v| v < 0.0));
    }

    #[test]
    fn slack_above_eta_is_rejected() {
        let t = kernel(&[&[0.6, 0.4], &[0.3, 0.5]]);
        let f0 = Func::new(vec![1.0, 0.99]).unwrap();
        let err = correct_ck_cs(&t, &f0, 0.5, &CkCsOptions::default()).unwrap_err();
        assert!(err.is_precondition());
    }
}
