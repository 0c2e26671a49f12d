//! Success rates over grids of `ε` and slack, across dimensions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eta, gen_instance, run_and_verify, InstanceSpec, Pipeline, RunOptions};
use crate::error::{BpbError, Result};
use crate::operator::NormKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pipeline: Pipeline,
    pub epsilons: Vec<f64>,
    /// Slacks as fractions of `η(ε)`.
    pub slack_fractions: Vec<f64>,
    /// `(source_dim, target_dim)` pairs.
    pub dims: Vec<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
    pub source_norm: Option<NormKind>,
    pub opts: RunOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Verified,
    /// The pipeline refused the input (slack above its threshold).
    Rejected,
    /// The pipeline failed or its certificate did not verify.
    Failed,
}

impl TrialStatus {
    fn name(self) -> &'static str {
        match self {
            TrialStatus::Verified => "verified",
            TrialStatus::Rejected => "rejected",
            TrialStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pipeline: Pipeline,
    pub epsilon: f64,
    pub slack_fraction: f64,
    pub slack: f64,
    pub source_dim: usize,
    pub target_dim: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub dist_point: f64,
    pub dist_operator: f64,
    pub steps: usize,
    /// Wall-clock time; the only field that varies between identical runs.
    pub runtime_ms: f64,
}

/// Per `(ε, slack fraction, dims)` counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellSummary {
    pub trials: usize,
    pub verified: usize,
    pub rejected: usize,
    pub failed: usize,
}

impl CellSummary {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.verified as f64 / self.trials as f64
        }
    }
}

pub const CSV_HEADER: &str = "pipeline,epsilon,slack_fraction,slack,source_dim,target_dim,trial,seed,status,dist_point,dist_operator,steps,runtime_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepReport {
    /// CSV with a fixed column order and 17 significant digits.
    pub fn to_csv(&self) -> String {
        self.render(true)
    }

    /// CSV without the runtime column; identical across repeated runs.
    pub fn to_csv_reproducible(&self) -> String {
        self.render(false)
    }

    fn render(&self, runtime: bool) -> String {
        let mut out = String::new();
        let header = if runtime { CSV_HEADER } else { CSV_HEADER.trim_end_matches(",runtime_ms") };
        out.push_str(header);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.pipeline,
                float(r.epsilon),
                float(r.slack_fraction),
                float(r.slack),
                r.source_dim,
                r.target_dim,
                r.trial,
                r.seed,
                r.status.name(),
                float(r.dist_point),
                float(r.dist_operator),
                r.steps
            );
            if runtime {
                let _ = write!(out, ",{}", float(r.runtime_ms));
            }
            out.push('\n');
        }
        out
    }

    /// Counts keyed by `(ε, slack fraction, source_dim, target_dim)`, with
    /// floats as their bit patterns so the keys order deterministically.
    pub fn summary(&self) -> BTreeMap<(u64, u64, usize, usize), CellSummary> {
        let mut out: BTreeMap<_, CellSummary> = BTreeMap::new();
        for r in &self.rows {
            let cell = out
                .entry((r.epsilon.to_bits(), r.slack_fraction.to_bits(), r.source_dim, r.target_dim))
                .or_default();
            cell.trials += 1;
            match r.status {
                TrialStatus::Verified => cell.verified += 1,
                TrialStatus::Rejected => cell.rejected += 1,
                TrialStatus::Failed => cell.failed += 1,
            }
        }
        out
    }

    /// Every trial with slack strictly below `η(ε)` verified.
    pub fn all_below_threshold_verified(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.slack_fraction < 1.0)
            .all(|r| r.status == TrialStatus::Verified)
    }

    /// Every verified row has both distances below `ε`.
    pub fn successes_within_epsilon(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.status == TrialStatus::Verified)
            .all(|r| r.dist_point < r.epsilon && r.dist_operator < r.epsilon)
    }
}

/// SplitMix64 step, used to derive one seed per trial.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(base: u64, cell: usize, trial: usize) -> u64 {
    mix(mix(mix(base) ^ cell as u64) ^ trial as u64)
}

/// Run `trials` random instances for every `(ε, slack, dims)` cell. Trials
/// run in parallel; rows come out ordered by cell, then trial.
pub fn sweep_eta(config: &SweepConfig) -> Result<SweepReport> {
    if config.epsilons.is_empty() || config.slack_fractions.is_empty() || config.dims.is_empty() {
        return Err(BpbError::InvalidInput("sweep grids must be non-empty".into()));
    }
    let mut jobs = Vec::new();
    let mut cell = 0;
    for &epsilon in &config.epsilons {
        let threshold = eta(config.pipeline, epsilon, &config.opts)?;
        for &fraction in &config.slack_fractions {
            if !(fraction >= 0.0) {
                return Err(BpbError::InvalidInput(format!("slack fraction {fraction} is negative")));
            }
            for &(source_dim, target_dim) in &config.dims {
                for trial in 0..config.trials {
                    jobs.push((epsilon, fraction, fraction * threshold, source_dim, target_dim, trial, trial_seed(config.seed, cell, trial)));
                }
                cell += 1;
            }
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|(epsilon, slack_fraction, slack, source_dim, target_dim, trial, seed)| {
            let start = Instant::now();
            let spec = InstanceSpec {
                pipeline: config.pipeline,
                source_dim,
                target_dim,
                slack,
                seed,
                source_norm: config.source_norm,
            };
            let outcome = gen_instance(&spec).and_then(|inst| run_and_verify(&inst, epsilon, &config.opts));
            let (status, dist_point, dist_operator, steps) = match outcome {
                Ok((sol, report)) if report.ok => (
                    TrialStatus::Verified,
                    report.recomputed.dist_point,
                    report.recomputed.dist_operator,
                    sol.steps,
                ),
                Ok((sol, report)) => (
                    TrialStatus::Failed,
                    report.recomputed.dist_point,
                    report.recomputed.dist_operator,
                    sol.steps,
                ),
                Err(e) if e.is_precondition() => (TrialStatus::Rejected, f64::NAN, f64::NAN, 0),
                Err(_) => (TrialStatus::Failed, f64::NAN, f64::NAN, 0),
            };
            SweepRow {
                pipeline: config.pipeline,
                epsilon,
                slack_fraction,
                slack,
                source_dim,
                target_dim,
                trial,
                seed,
                status,
                dist_point,
                dist_operator,
                steps,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();
    Ok(SweepReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(fractions: Vec<f64>) -> SweepConfig {
        SweepConfig {
            pipeline: Pipeline::CkCs,
            epsilons: vec![0.5],
            slack_fractions: fractions,
            dims: vec![(3, 2), (4, 4)],
            trials: 3,
            seed: 11,
            source_norm: None,
            opts: RunOptions::default(),
        }
    }

    #[test]
    fn below_threshold_cells_verify() {
        let report = sweep_eta(&config(vec![0.0, 0.5, 0.99])).unwrap();
        assert_eq!(report.rows.len(), 18);
        assert!(report.all_below_threshold_verified());
        assert!(report.successes_within_epsilon());
        for r in report.rows.iter().filter(|r| r.slack_fraction == 0.0) {
            assert_eq!((r.dist_point, r.dist_operator), (0.0, 0.0));
        }
    }

    #[test]
    fn above_threshold_is_rejected() {
        let report = sweep_eta(&config(vec![1.01])).unwrap();
        assert!(report.rows.iter().all(|r| r.status == TrialStatus::Rejected));
    }

    #[test]
    fn reports_are_reproducible() {
        let a = sweep_eta(&config(vec![0.5])).unwrap();
        let b = sweep_eta(&config(vec![0.5])).unwrap();
        assert_eq!(a.to_csv_reproducible(), b.to_csv_reproducible());
        assert!(a.to_csv().starts_with(CSV_HEADER));
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(sweep_eta(&config(vec![])).is_err());
    }
}
