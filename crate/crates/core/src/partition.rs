//! Averaging projections onto block-constant functions.
//!
//! Given `T: C0(L) -> Y` with `Y` Euclidean and a reference function `f0`,
//! [`build_partition`] cuts `L` into disjoint blocks `K_j` on which `f0`
//! oscillates by less than `ε`, with a weight `μ` such that the averaging
//! projection
//!
//! ```text
//! P f = Σ_j (1/μ(K_j)) (Σ_{s ∈ K_j} f(s) μ(s)) φ_j
//! ```
//!
//! satisfies `||T - T P|| < ε`.

use std::collections::BTreeMap;

use num::{BigRational, One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ck_cs::ROUNDING;
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::spaces::{check_len, oscillation, tv_norm_of, Func, Measure};

/// Largest grid net [`build_partition`] builds before switching to the
/// basis net.
pub const DEFAULT_MAX_GRID: usize = 20_000;

const NET_CHECK_SEED: u64 = 0x5eed_ba11;

/// Random dual vectors drawn when checking a net's covering radius.
const NET_CHECK_SAMPLES: usize = 1000;

/// Cap on `samples * |net| * dim` for the covering check.
const NET_CHECK_WORK: usize = 20_000_000;

/// A finite set of measures covering `T*(B_{Y*})`: `measures[i] = T*(duals[i])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualNet {
    pub measures: Vec<Measure>,
    pub duals: Vec<Vec<f64>>,
    /// Grid pitch in the dual ball; zero for the trivial net of `T = 0`.
    pub pitch: f64,
    pub radius: f64,
    /// Largest distance seen by the random covering check.
    pub checked_distance: f64,
}

fn adjoint(t: &GeneralOperator, y: &[f64]) -> Vec<f64> {
    (0..t.source_dim())
        .map(|s| t.matrix().iter().zip(y).fold(0.0, |acc, (row, yk)| acc + yk * row[s]))
        .collect()
}

fn grid_resolution(p: usize, t_norm: f64, radius: f64) -> usize {
    ((p as f64).sqrt() * t_norm / radius).ceil().max(1.0) as usize
}

/// Number of grid points enumerated by [`dual_ball_net`] before filtering.
pub fn grid_net_size(t: &GeneralOperator, radius: f64) -> Result<usize> {
    let t_norm = t.oracle_norm()?.0;
    let n = grid_resolution(t.target_dim(), t_norm, radius);
    Ok((2 * n + 3).saturating_pow(t.target_dim() as u32))
}

/// A `radius`-net of `T*(B_{Y*})` for `T` into Euclidean `R^p`, `p <= 4`.
///
/// The dual ball is sampled on the cubic grid of pitch
/// `h = 1/ceil(sqrt(p) ||T|| / radius)`; grid points outside the ball are
/// pulled back onto the sphere. Every `y*` in the ball lies within
/// `h sqrt(p)/2` of a kept point and `T*` is `||T||`-Lipschitz from the
/// Euclidean norm to total variation, so the images are within `radius/2`.
/// The covering radius is re-checked on random unit dual vectors.
pub fn dual_ball_net(t: &GeneralOperator, radius: f64, max_points: usize) -> Result<DualNet> {
    const STAGE: &str = "dual_ball_net";
    if !t.target_norm().is_euclid() {
        return Err(BpbError::Unsupported(format!(
            "dual nets need a Euclidean target, found {}",
            t.target_norm()
        )));
    }
    let p = t.target_dim();
    if p > 4 {
        return Err(BpbError::Unsupported(format!("target dimension {p} exceeds 4")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(BpbError::InvalidInput(format!("radius {radius} must be positive")));
    }
    let n = t.source_dim();
    if t.is_zero() {
        return Ok(DualNet {
            measures: vec![Measure::zeros(n)],
            duals: vec![vec![0.0; p]],
            pitch: 0.0,
            radius,
            checked_distance: 0.0,
        });
    }
    let t_norm = t.oracle_norm()?.0;
    let res = grid_resolution(p, t_norm, radius);
    let size = (2 * res + 3).saturating_pow(p as u32);
    if size > max_points {
        return Err(BpbError::BudgetExhausted {
            stage: STAGE,
            detail: format!("grid of {size} points exceeds {max_points}"),
        });
    }
    let h = 1.0 / res as f64;
    let reach = 1.0 + h * (p as f64).sqrt() / 2.0;
    let side = 2 * res + 3;
    let mut duals = Vec::new();
    for index in 0..size {
        let mut rest = index;
        let y: Vec<f64> = (0..p)
            .map(|_| {
                let k = (rest % side) as f64 - (res + 1) as f64;
                rest /= side;
                k * h
            })
            .collect();
        let len = NormKind::Euclid.norm(&y);
        if len > reach {
            continue;
        }
        duals.push(if len > 1.0 { y.iter().map(|v| v / len).collect() } else { y });
    }
    let measures: Vec<Measure> = duals
        .iter()
        .map(|y| Measure::new(adjoint(t, y)))
        .collect::<Result<_>>()?;

    let samples = (NET_CHECK_WORK / (measures.len() * n).max(1)).clamp(64, NET_CHECK_SAMPLES);
    let mut rng = ChaCha8Rng::seed_from_u64(NET_CHECK_SEED);
    let mut checked_distance: f64 = 0.0;
    for _ in 0..samples {
        let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = NormKind::Euclid.norm(&g);
        if len == 0.0 {
            continue;
        }
        let image = adjoint(t, &g.iter().map(|v| v / len).collect::<Vec<_>>());
        let nearest = measures
            .iter()
            .map(|m| image.iter().zip(m.masses()).fold(0.0, |acc, (a, b)| acc + (a - b).abs()))
            .fold(f64::INFINITY, f64::min);
        checked_distance = checked_distance.max(nearest);
    }
    if checked_distance >= radius {
        return Err(BpbError::post(
            STAGE,
            format!("random dual vector at distance {checked_distance} >= radius {radius}"),
        ));
    }
    Ok(DualNet {
        measures,
        duals,
        pitch: h,
        radius,
        checked_distance,
    })
}

/// Disjoint blocks with a positive weight and the averaging projection they
/// define. Points outside every block are sent to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionProjection {
    blocks: Vec<Vec<usize>>,
    weight: Measure,
}

impl PartitionProjection {
    pub fn new(weight: Measure, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n = weight.len();
        if weight.masses().iter().any(|&w| w < 0.0) {
            return Err(BpbError::InvalidInput("weights must be non-negative".into()));
        }
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(BpbError::EmptyBlock);
            }
            for &t in block {
                if t >= n {
                    return Err(BpbError::InvalidInput(format!("point {t} outside 0..{n}")));
                }
                if std::mem::replace(&mut seen[t], true) {
                    return Err(BpbError::InvalidInput(format!("point {t} lies in two blocks")));
                }
            }
            if weight.mass_of(block) <= 0.0 {
                return Err(BpbError::InvalidInput("every block needs positive weight".into()));
            }
        }
        Ok(PartitionProjection { blocks, weight })
    }

    /// The empty partition on `n` points; its projection is zero.
    pub fn empty(n: usize) -> Self {
        PartitionProjection {
            blocks: Vec::new(),
            weight: Measure::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn weight(&self) -> &Measure {
        &self.weight
    }

    pub fn block_weight(&self, j: usize) -> f64 {
        self.weight.mass_of(&self.blocks[j])
    }

    /// Indicators `φ_j` of the blocks.
    pub fn bumps(&self) -> Vec<Func> {
        self.blocks.iter().map(|b| Func::indicator(self.dim(), b)).collect()
    }

    /// `μ`-average of `f` over block `j`.
    pub fn average(&self, j: usize, f: &[f64]) -> f64 {
        let w = self.weight.masses();
        let block = &self.blocks[j];
        block.iter().fold(0.0, |acc, &s| acc + f[s] * w[s]) / self.block_weight(j)
    }

    /// Block coordinates of `P f`.
    pub fn coordinates(&self, f: &Func) -> Result<Vec<f64>> {
        check_len(self.dim(), f.len())?;
        Ok((0..self.len()).map(|j| self.average(j, f.values())).collect())
    }

    /// `Σ_j c_j φ_j`.
    pub fn synthesize(&self, coords: &[f64]) -> Result<Func> {
        check_len(self.len(), coords.len())?;
        let mut values = vec![0.0; self.dim()];
        for (block, &c) in self.blocks.iter().zip(coords) {
            for &t in block {
                values[t] = c;
            }
        }
        Func::new(values)
    }

    pub fn apply(&self, f: &Func) -> Result<Func> {
        self.synthesize(&self.coordinates(f)?)
    }

    /// `P*`: spreads the mass of each block according to `μ`.
    pub fn adjoint(&self, m: &Measure) -> Result<Measure> {
        check_len(self.dim(), m.len())?;
        let w = self.weight.masses();
        let mut out = vec![0.0; self.dim()];
        for (j, block) in self.blocks.iter().enumerate() {
            let k = m.mass_of(block) / self.block_weight(j);
            for &t in block {
                out[t] = k * w[t];
            }
        }
        Measure::new(out)
    }

    /// `P[t][s] = μ(s)/μ(K_j)` for `t, s ∈ K_j`, zero elsewhere.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let w = self.weight.masses();
        let mut out = vec![vec![0.0; n]; n];
        for (j, block) in self.blocks.iter().enumerate() {
            let total = self.block_weight(j);
            for &t in block {
                for &s in block {
                    out[t][s] = w[s] / total;
                }
            }
        }
        out
    }

    /// `P` as a sup-to-sup operator.
    pub fn as_operator(&self) -> GeneralOperator {
        GeneralOperator::new(self.matrix(), NormKind::Sup, NormKind::Sup)
            .expect("projection matrix is square and finite")
    }

    /// The projector with each `μ(s)` read as an exact rational, so that
    /// `μ(K_j)` and every quotient are exact.
    pub fn exact_matrix(&self) -> Vec<Vec<BigRational>> {
        let n = self.dim();
        let w: Vec<BigRational> = self
            .weight
            .masses()
            .iter()
            .map(|&x| BigRational::from_float(x).expect("finite weight"))
            .collect();
        let mut out = vec![vec![BigRational::zero(); n]; n];
        for block in &self.blocks {
            let total = block.iter().fold(BigRational::zero(), |acc, &s| acc + &w[s]);
            for &t in block {
                for &s in block {
                    out[t][s] = &w[s] / &total;
                }
            }
        }
        out
    }

    /// `P∘P = P` in exact rational arithmetic.
    pub fn is_idempotent_exact(&self) -> bool {
        let p = self.exact_matrix();
        let n = self.dim();
        (0..n).all(|t| {
            (0..n).all(|u| {
                let sq = (0..n).fold(BigRational::zero(), |acc, s| acc + &p[t][s] * &p[s][u]);
                sq == p[t][u]
            })
        })
    }

    /// Every row of a covered point sums to exactly one, every other row
    /// is zero; hence `||P|| = 1` for a non-empty partition.
    pub fn has_unit_rows_exact(&self) -> bool {
        let p = self.exact_matrix();
        let mut covered = vec![false; self.dim()];
        self.blocks.iter().flatten().for_each(|&t| covered[t] = true);
        p.iter().zip(&covered).all(|(row, &c)| {
            let sum = row.iter().fold(BigRational::zero(), |acc, x| acc + x);
            row.iter().all(|x| *x >= BigRational::zero())
                && if c { sum.is_one() } else { sum.is_zero() }
        })
    }
}

/// Which net of `T*(B_{Y*})` the partition was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    /// No net: `T = 0`.
    None,
    /// The `ε/4` grid net of [`dual_ball_net`].
    Grid,
    /// The images `T* e_k` of the unit vectors of `Y*`. Every `T* y*` is
    /// their combination with `Σ|y_k| <= sqrt(p)`, so per-element errors
    /// below `ε/6` give `||T - TP|| <= sqrt(p) ε/6 < ε` for `p < 36`.
    Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    /// Largest grid net to build; larger grids fall back to the basis net.
    pub max_grid: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            max_grid: DEFAULT_MAX_GRID,
        }
    }
}

/// Every intermediate object of [`build_partition`].
#[derive(Debug, Clone, Serialize)]
pub struct PartitionTrace {
    pub epsilon: f64,
    pub net_kind: NetKind,
    /// Net elements `μ_i`.
    pub net: Vec<Measure>,
    /// `g_i = μ_i/μ` on the support of `μ`, zero elsewhere.
    pub densities: Vec<Vec<f64>>,
    /// Quantization pitch.
    pub rho: f64,
    /// Simple functions `s_i`, constant on each level set.
    pub simple_approx: Vec<Vec<f64>>,
    /// `||g_i - s_i||` in `L1(μ)`.
    pub l1_errors: Vec<f64>,
    /// Level sets `A_j` of the quantized density vector.
    pub level_sets: Vec<Vec<usize>>,
    /// `C_j`: `A_j` without its `μ`-null points.
    pub trimmed: Vec<Vec<usize>>,
    /// `K_j^p` for each `j`: the chunks of `C_j` with small `f0`-oscillation.
    pub refined: Vec<Vec<Vec<usize>>>,
    /// `α_j^i`: value of `s_i` on `A_j`, indexed `[j][i]`.
    pub alpha: Vec<Vec<f64>>,
    /// `β_b^i`: value of `s_i` on the final block `b`, indexed `[b][i]`.
    pub beta: Vec<Vec<f64>>,
    /// `M = max |α_j^i|`.
    pub coeff_bound: f64,
    /// Number of level sets.
    pub m0: usize,
    /// Number of chunks of each `C_j`.
    pub n_j: Vec<usize>,
    /// Number of net elements.
    pub t: usize,
    /// `||μ_i - P*(ν_i)||` with `ν_i = s_i μ`.
    pub chain_errors: Vec<f64>,
    /// Largest `osc(f0, K_j)`.
    pub max_oscillation: f64,
    /// Oracle value of `||T - T P||`.
    pub residual_norm: f64,
}

impl PartitionTrace {
    fn empty(epsilon: f64) -> Self {
        PartitionTrace {
            epsilon,
            net_kind: NetKind::None,
            net: Vec::new(),
            densities: Vec::new(),
            rho: 0.0,
            simple_approx: Vec::new(),
            l1_errors: Vec::new(),
            level_sets: Vec::new(),
            trimmed: Vec::new(),
            refined: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            coeff_bound: 0.0,
            m0: 0,
            n_j: Vec::new(),
            t: 0,
            chain_errors: Vec::new(),
            max_oscillation: 0.0,
            residual_norm: 0.0,
        }
    }
}

/// Split a block into maximal runs `[v, v + width)` of sorted `f0` values.
fn chunk_by_value(block: &[usize], f0: &[f64], width: f64) -> Vec<Vec<usize>> {
    let mut sorted = block.to_vec();
    sorted.sort_by(|&a, &b| f0[a].total_cmp(&f0[b]).then(a.cmp(&b)));
    let mut chunks: Vec<Vec<usize>> = Vec::new();
    let mut start = f64::NEG_INFINITY;
    for t in sorted {
        if chunks.is_empty() || f0[t] >= start + width {
            start = f0[t];
            chunks.push(Vec::new());
        }
        chunks.last_mut().expect("a chunk is open").push(t);
    }
    chunks
}

/// Blocks of small `f0`-oscillation and an averaging projection `P` with
/// `||T - TP|| < ε`, for `T` from a sup-normed source into a Euclidean
/// target. `T = 0` yields the empty partition.
pub fn build_partition(
    t: &GeneralOperator,
    f0: &Func,
    epsilon: f64,
    opts: &PartitionOptions,
) -> Result<(PartitionProjection, PartitionTrace)> {
    const STAGE: &str = "build_partition";
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BpbError::InvalidInput(format!("epsilon {epsilon} must be positive")));
    }
    if !t.source_norm().is_sup() {
        return Err(BpbError::Unsupported(format!("source norm {} is not sup", t.source_norm())));
    }
    if !t.target_norm().is_euclid() {
        return Err(BpbError::Unsupported(format!("target norm {} is not Euclidean", t.target_norm())));
    }
    let n = t.source_dim();
    check_len(n, f0.len())?;
    if t.is_zero() {
        return Ok((PartitionProjection::empty(n), PartitionTrace::empty(epsilon)));
    }

    let radius = epsilon / 4.0;
    let grid_fits = t.target_dim() <= 4 && grid_net_size(t, radius)? <= opts.max_grid;
    let (net_kind, net) = if grid_fits {
        (NetKind::Grid, dual_ball_net(t, radius, opts.max_grid)?.measures)
    } else {
        let rows = t.matrix().iter().map(|r| Measure::new(r.clone())).collect::<Result<_>>()?;
        (NetKind::Basis, rows)
    };
    let count = net.len();

    let mu: Vec<f64> = (0..n)
        .map(|s| net.iter().fold(0.0, |acc, m| acc + m.masses()[s].abs()))
        .collect();
    let total: f64 = tv_norm_of(&mu);
    let densities: Vec<Vec<f64>> = net
        .iter()
        .map(|m| (0..n).map(|s| if mu[s] > 0.0 { m.masses()[s] / mu[s] } else { 0.0 }).collect())
        .collect();

    let rho = (epsilon / 12.0) / (count as f64 * total);
    let keys: Vec<Vec<i64>> = (0..n)
        .map(|s| densities.iter().map(|g| (g[s] / rho).floor() as i64).collect())
        .collect();
    let simple_approx: Vec<Vec<f64>> = (0..count)
        .map(|i| (0..n).map(|s| keys[s][i] as f64 * rho).collect())
        .collect();
    let l1_errors: Vec<f64> = (0..count)
        .map(|i| (0..n).fold(0.0, |acc, s| acc + (densities[i][s] - simple_approx[i][s]).abs() * mu[s]))
        .collect();
    if let Some(e) = l1_errors.iter().find(|&&e| e >= epsilon / 12.0) {
        return Err(BpbError::post(STAGE, format!("density error {e} >= epsilon/12")));
    }

    let mut by_key: BTreeMap<&[i64], Vec<usize>> = BTreeMap::new();
    for (s, key) in keys.iter().enumerate() {
        by_key.entry(key.as_slice()).or_default().push(s);
    }
    let level_sets: Vec<Vec<usize>> = by_key.into_values().collect();
    let alpha: Vec<Vec<f64>> = level_sets
        .iter()
        .map(|a| (0..count).map(|i| simple_approx[i][a[0]]).collect())
        .collect();
    let trimmed: Vec<Vec<usize>> = level_sets
        .iter()
        .map(|a| a.iter().copied().filter(|&s| mu[s] > 0.0).collect())
        .collect();
    let refined: Vec<Vec<Vec<usize>>> =
        trimmed.iter().map(|c| chunk_by_value(c, f0.values(), epsilon)).collect();
    let n_j = refined.iter().map(Vec::len).collect();
    let mut blocks = Vec::new();
    let mut beta = Vec::new();
    for (j, chunks) in refined.iter().enumerate() {
        for chunk in chunks {
            blocks.push(chunk.clone());
            beta.push(alpha[j].clone());
        }
    }
    let coeff_bound = alpha.iter().flatten().fold(0.0, |acc: f64, a| acc.max(a.abs()));

    let projection = PartitionProjection::new(Measure::new(mu.clone())?, blocks)?;

    let chain_errors: Vec<f64> = (0..count)
        .map(|i| {
            let nu = Measure::new((0..n).map(|s| simple_approx[i][s] * mu[s]).collect())?;
            Ok(net[i].sub(&projection.adjoint(&nu)?)?.tv_norm())
        })
        .collect::<Result<_>>()?;
    if let Some(e) = chain_errors.iter().find(|&&e| e >= radius) {
        return Err(BpbError::post(STAGE, format!("net element moved {e} >= epsilon/4 under P*")));
    }

    let max_oscillation = projection
        .blocks()
        .iter()
        .map(|b| oscillation(f0, b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if max_oscillation >= epsilon {
        return Err(BpbError::post(STAGE, format!("block oscillation {max_oscillation} >= epsilon")));
    }
    if !projection.is_idempotent_exact() || !projection.has_unit_rows_exact() {
        return Err(BpbError::post(STAGE, "projector is not an exact norm-one projection"));
    }
    let p_norm = projection.as_operator().oracle_norm()?.0;
    if (p_norm - 1.0).abs() > ROUNDING {
        return Err(BpbError::post(STAGE, format!("||P|| = {p_norm}")));
    }
    let tp = t.compose(&projection.as_operator())?;
    let residual_norm = t.sub(&tp)?.oracle_norm()?.0;
    if residual_norm >= epsilon {
        return Err(BpbError::post(STAGE, format!("||T - TP|| = {residual_norm} >= epsilon")));
    }

    let trace = PartitionTrace {
        epsilon,
        net_kind,
        t: count,
        net,
        densities,
        rho,
        simple_approx,
        l1_errors,
        m0: level_sets.len(),
        level_sets,
        trimmed,
        refined,
        alpha,
        beta,
        coeff_bound,
        n_j,
        chain_errors,
        max_oscillation,
        residual_norm,
    };
    Ok((projection, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(rows: &[&[f64]]) -> GeneralOperator {
        GeneralOperator::new(rows.iter().map(|r| r.to_vec()).collect(), NormKind::Sup, NormKind::Euclid)
            .unwrap()
    }

    #[test]
    fn zero_operator_has_trivial_net() {
        let t = GeneralOperator::zeros(2, 3, NormKind::Sup, NormKind::Euclid);
        let net = dual_ball_net(&t, 0.1, 1000).unwrap();
        assert_eq!(net.measures, vec![Measure::zeros(3)]);
    }

    #[test]
    fn rank_one_net_is_a_segment() {
        let t = euclid(&[&[0.5, -0.25]]);
        let radius = 0.1;
        let net = dual_ball_net(&t, radius, 1000).unwrap();
        let ends: Vec<f64> = net.duals.iter().map(|y| y[0]).collect();
        assert!(ends.contains(&1.0) && ends.contains(&-1.0));
        let mut ys = ends.clone();
        ys.sort_by(f64::total_cmp);
        for w in ys.windows(2) {
            // spacing of the images along the segment
            assert!((w[1] - w[0]) * 0.75 <= radius);
        }
    }

    #[test]
    fn large_grid_is_refused() {
        let t = euclid(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let err = dual_ball_net(&t, 1e-4, 1000).unwrap_err();
        assert!(matches!(err, BpbError::BudgetExhausted { .. }));
    }

    #[test]
    fn constant_f0_gives_zero_oscillation() {
        let t = euclid(&[&[0.3, -0.2, 0.1, 0.4], &[0.1, 0.1, -0.5, 0.2]]);
        let f0 = Func::constant(4, 0.7);
        let (p, trace) = build_partition(&t, &f0, 0.3, &PartitionOptions::default()).unwrap();
        assert_eq!(trace.max_oscillation, 0.0);
        assert!(trace.n_j.iter().all(|&k| k == 1));
        assert!(p.is_idempotent_exact());
    }

    #[test]
    fn zero_operator_gives_empty_partition() {
        let t = GeneralOperator::zeros(2, 3, NormKind::Sup, NormKind::Euclid);
        let (p, trace) = build_partition(&t, &Func::constant(3, 1.0), 0.3, &PartitionOptions::default()).unwrap();
        assert!(p.is_empty());
        assert_eq!(trace.residual_norm, 0.0);
        assert_eq!(p.apply(&Func::constant(3, 1.0)).unwrap(), Func::zeros(3));
    }

    #[test]
    fn chunks_are_left_closed() {
        let f0 = [0.0, 0.3, 0.29, 0.6, 1.0];
        let chunks = chunk_by_value(&[0, 1, 2, 3, 4], &f0, 0.3);
        assert_eq!(chunks, vec![vec![0, 2], vec![1], vec![3], vec![4]]);
    }

    #[test]
    fn projection_averages_by_weight() {
        let w = Measure::new(vec![1.0, 3.0, 2.0]).unwrap();
        let p = PartitionProjection::new(w, vec![vec![0, 1], vec![2]]).unwrap();
        let f = Func::new(vec![1.0, -1.0, 5.0]).unwrap();
        assert_eq!(p.apply(&f).unwrap().values(), &[-0.5, -0.5, 5.0]);
        assert!(p.is_idempotent_exact());
        assert!(p.has_unit_rows_exact());
        let m = Measure::new(vec![1.0, 1.0, -1.0]).unwrap();
        assert_eq!(p.adjoint(&m).unwrap().masses(), &[0.5, 1.5, -1.0]);
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let w = Measure::new(vec![1.0, 1.0]).unwrap();
        assert!(PartitionProjection::new(w.clone(), vec![vec![0, 1], vec![1]]).is_err());
        assert!(PartitionProjection::new(w, vec![vec![]]).is_err());
        let z = Measure::new(vec![0.0, 1.0]).unwrap();
        assert!(PartitionProjection::new(z, vec![vec![0]]).is_err());
    }

    #[test]
    fn tiny_epsilon_switches_to_basis_net() {
        let t = euclid(&[&[0.3, -0.2, 0.1], &[0.1, 0.1, -0.5]]);
        let f0 = Func::new(vec![1.0, -0.2, 0.5]).unwrap();
        let (_, trace) = build_partition(&t, &f0, 1e-4, &PartitionOptions::default()).unwrap();
        assert_eq!(trace.net_kind, NetKind::Basis);
        assert!(trace.residual_norm < 1e-4);
    }
}
