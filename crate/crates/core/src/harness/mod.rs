//! Instances, pipeline dispatch, independent verification and sweeps.

pub mod gen;
pub mod sweep;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certificate::{BpbCertificate, DEFAULT_TOL};
use crate::ck_cs::{correct_ck_cs, CkCsOptions};
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::predual::{correct_predual, PredualOptions, PredualParams};
use crate::spaces::{Func, Kernel};
use crate::ucx::{correct_ucx, UcxOptions, UcxParams};

pub use gen::gen_instance;
pub use sweep::{sweep_eta, SweepConfig, SweepReport, SweepRow};
pub use verify::{inject_fault, run_and_verify, verify, Fault, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "ck-cs")]
    CkCs,
    #[serde(rename = "ucx")]
    Ucx,
    #[serde(rename = "predual")]
    Predual,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::CkCs, Pipeline::Ucx, Pipeline::Predual];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::CkCs => "ck-cs",
            Pipeline::Ucx => "ucx",
            Pipeline::Predual => "predual",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = BpbError;
    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| BpbError::InvalidInput(format!("unknown pipeline {s:?}")))
    }
}

/// Recipe for a random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub pipeline: Pipeline,
    pub source_dim: usize,
    pub target_dim: usize,
    /// Requested `1 - ||T x0||`.
    pub slack: f64,
    pub seed: u64,
    /// Source norm for the predual pipeline; Euclidean when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_norm: Option<NormKind>,
}

/// Provenance of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub spec: InstanceSpec,
    /// `1 - ||T x0||` measured on the generated data.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkCsInstance {
    pub kernel: Kernel,
    pub f0: Func,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcxInstance {
    pub operator: GeneralOperator,
    pub f0: Func,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredualInstance {
    pub operator: GeneralOperator,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
}

/// An operator and a starting point, tagged by the pipeline that handles it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline")]
pub enum Instance {
    #[serde(rename = "ck-cs")]
    CkCs(CkCsInstance),
    #[serde(rename = "ucx")]
    Ucx(UcxInstance),
    #[serde(rename = "predual")]
    Predual(PredualInstance),
}

impl Instance {
    pub fn pipeline(&self) -> Pipeline {
        match self {
            Instance::CkCs(_) => Pipeline::CkCs,
            Instance::Ucx(_) => Pipeline::Ucx,
            Instance::Predual(_) => Pipeline::Predual,
        }
    }

    pub fn meta(&self) -> Option<&InstanceMeta> {
        match self {
            Instance::CkCs(i) => i.meta.as_ref(),
            Instance::Ucx(i) => i.meta.as_ref(),
            Instance::Predual(i) => i.meta.as_ref(),
        }
    }

    /// `(source_dim, target_dim)`.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Instance::CkCs(i) => (i.kernel.source_dim(), i.kernel.target_dim()),
            Instance::Ucx(i) => (i.operator.source_dim(), i.operator.target_dim()),
            Instance::Predual(i) => (i.operator.source_dim(), i.operator.target_dim()),
        }
    }

    /// Source point `x0` as a plain vector.
    pub fn start(&self) -> &[f64] {
        match self {
            Instance::CkCs(i) => i.f0.values(),
            Instance::Ucx(i) => i.f0.values(),
            Instance::Predual(i) => &i.x0,
        }
    }
}

/// Options shared by every pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub tol: f64,
    pub ucx: UcxOptions,
    pub predual: PredualOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions::with_tol(DEFAULT_TOL)
    }
}

impl RunOptions {
    pub fn with_tol(tol: f64) -> Self {
        RunOptions {
            tol,
            ucx: UcxOptions {
                tol,
                ..UcxOptions::default()
            },
            predual: PredualOptions {
                tol,
                ..PredualOptions::default()
            },
        }
    }

    fn ck_cs(&self) -> CkCsOptions {
        CkCsOptions { tol: self.tol }
    }
}

/// Largest slack each pipeline accepts at accuracy `epsilon`.
pub fn eta(pipeline: Pipeline, epsilon: f64, opts: &RunOptions) -> Result<f64> {
    Ok(match pipeline {
        Pipeline::CkCs => crate::ck_cs::eta(epsilon),
        Pipeline::Ucx => UcxParams::new(epsilon, opts.ucx.modulus)?.alpha,
        Pipeline::Predual => PredualParams::eta_for(epsilon, &opts.predual.eta_prime),
    })
}

/// The corrected operator as produced by a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolvedOperator {
    Kernel(Kernel),
    General(GeneralOperator),
}

/// Output of a pipeline run: the claimed operator and certificate plus the
/// pipeline's own distance ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pipeline: Pipeline,
    pub epsilon: f64,
    pub operator: SolvedOperator,
    pub certificate: BpbCertificate,
    /// Contraction steps (ck-cs), blocks (ucx) or truncation dimension (predual).
    pub steps: usize,
    pub ledger: serde_json::Value,
}

fn ledger<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("ledgers serialize")
}

/// Run the pipeline matching `instance`.
pub fn run(instance: &Instance, epsilon: f64, opts: &RunOptions) -> Result<Solution> {
    match instance {
        Instance::CkCs(i) => {
            let r = correct_ck_cs(&i.kernel, &i.f0, epsilon, &opts.ck_cs())?;
            let summary = serde_json::json!({
                "slack": r.slack,
                "delta": r.delta,
                "r": r.schedule.r,
                "flipped": r.flipped,
                "flatten_movement": r.flatten_movement,
                "iterate_movement": r.iterate_movement(),
                "iterate_bound": r.delta / (1.0 - r.schedule.r),
                "final_defect": r.final_defect,
            });
            Ok(Solution {
                pipeline: Pipeline::CkCs,
                epsilon,
                operator: SolvedOperator::Kernel(r.s),
                certificate: r.certificate,
                steps: r.steps_used,
                ledger: summary,
            })
        }
        Instance::Ucx(i) => {
            let r = correct_ucx(&i.operator, &i.f0, epsilon, &opts.ucx)?;
            Ok(Solution {
                pipeline: Pipeline::Ucx,
                epsilon,
                operator: SolvedOperator::General(r.s),
                certificate: r.certificate,
                steps: r.projection.len(),
                ledger: ledger(&r.ledger),
            })
        }
        Instance::Predual(i) => {
            let r = correct_predual(&i.operator, &i.x0, epsilon, &opts.predual)?;
            Ok(Solution {
                pipeline: Pipeline::Predual,
                epsilon,
                operator: SolvedOperator::General(r.s),
                certificate: r.certificate,
                steps: r.m,
                ledger: ledger(&r.ledger),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_names_round_trip() {
        for p in Pipeline::ALL {
            assert_eq!(p.name().parse::<Pipeline>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
        }
        assert!("ckcs".parse::<Pipeline>().is_err());
    }

    #[test]
    fn untagged_ck_cs_instance_parses() {
        let json = r#"{"kernel":{"rows":[[0.6,0.4],[0.3,0.5]]},"f0":{"values":[1.0,0.999]}}"#;
        let i: CkCsInstance = serde_json::from_str(json).unwrap();
        assert_eq!(i.kernel.target_dim(), 2);
        let tagged = format!(r#"{{"pipeline":"ck-cs",{}"#, &json[1..]);
        let t: Instance = serde_json::from_str(&tagged).unwrap();
        assert_eq!(t.pipeline(), Pipeline::CkCs);
    }

    #[test]
    fn eta_per_pipeline() {
        let o = RunOptions::default();
        assert_eq!(eta(Pipeline::CkCs, 0.5, &o).unwrap(), 0.25 / 432.0);
        assert_eq!(eta(Pipeline::Predual, 0.5, &o).unwrap(), 0.25 * 0.0625);
        assert!(eta(Pipeline::Ucx, 0.5, &o).unwrap() > 0.0);
    }
}
