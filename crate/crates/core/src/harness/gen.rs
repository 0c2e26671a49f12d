//! Random instances with a prescribed slack `1 - ||T x0||`.
//!
//! Entries are i.i.d. uniform on `[-1, 1]`, the operator is normalised to
//! norm one, and `x0` is moved off an exact norming point until the slack
//! matches. The realised slack is re-measured and stored with the instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CkCsInstance, Instance, InstanceMeta, InstanceSpec, Pipeline, PredualInstance, UcxInstance};
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::spaces::{sup_norm_of, tv_norm_of, Func, Kernel};

/// Largest gap allowed between requested and realised slack.
pub const SLACK_MATCH: f64 = 1e-12;

const ATTEMPTS: usize = 100;

/// Decay of successive rows in predual instances.
const ROW_DECAY: f64 = 0.3;

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn infeasible(spec: &InstanceSpec, why: &str) -> BpbError {
    BpbError::InvalidInput(format!(
        "cannot generate a {} instance with slack {} ({why})",
        spec.pipeline, spec.slack
    ))
}

/// Build the instance described by `spec`; the same spec always yields the
/// same instance.
pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    if !(spec.slack >= 0.0 && spec.slack < 1.0) {
        return Err(infeasible(spec, "slack must lie in [0, 1)"));
    }
    if spec.source_dim < 2 || spec.target_dim < 1 {
        return Err(infeasible(spec, "need at least two source and one target dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..ATTEMPTS {
        let made = match spec.pipeline {
            Pipeline::CkCs => try_ck_cs(&mut rng, spec)?.map(|(i, s)| (Instance::CkCs(i), s)),
            Pipeline::Ucx => try_ucx(&mut rng, spec)?.map(|(i, s)| (Instance::Ucx(i), s)),
            Pipeline::Predual => try_predual(&mut rng, spec)?.map(|(i, s)| (Instance::Predual(i), s)),
        };
        if let Some((mut instance, slack)) = made {
            if (slack - spec.slack).abs() <= SLACK_MATCH {
                let meta = Some(InstanceMeta {
                    spec: spec.clone(),
                    slack,
                });
                match &mut instance {
                    Instance::CkCs(i) => i.meta = meta,
                    Instance::Ucx(i) => i.meta = meta,
                    Instance::Predual(i) => i.meta = meta,
                }
                return Ok(instance);
            }
        }
    }
    Err(infeasible(spec, "no draw matched the slack"))
}

/// Kernel normalised to norm one; `f0` is the sign pattern of the largest
/// row with its heaviest coordinate pulled toward zero.
fn try_ck_cs(rng: &mut ChaCha8Rng, spec: &InstanceSpec) -> Result<Option<(CkCsInstance, f64)>> {
    let raw = Kernel::new(uniform_matrix(rng, spec.target_dim, spec.source_dim))?;
    let norm = raw.norm();
    if norm == 0.0 {
        return Ok(None);
    }
    let kernel = raw.scale(1.0 / norm);
    let norms = kernel.row_norms();
    let s_star = (0..norms.len()).fold(0, |b, s| if norms[s] > norms[b] { s } else { b });
    let row = kernel.row(s_star);
    let mut f0: Vec<f64> = row.iter().map(|&v| sgn(v)).collect();
    if spec.slack > 0.0 {
        let k = (0..row.len()).fold(0, |b, t| if row[t].abs() > row[b].abs() { t } else { b });
        let shrink = spec.slack / row[k].abs();
        if shrink > 2.0 {
            return Ok(None);
        }
        f0[k] = sgn(row[k]) * (1.0 - shrink);
    }
    let f0 = Func::new(f0)?;
    let slack = 1.0 - kernel.apply(&f0)?.sup_norm();
    Ok(Some((CkCsInstance { kernel, f0, meta: None }, slack)))
}

/// Operator into Euclidean space normalised at its oracle sign vector `σ`;
/// `f0 = σ` with one coordinate scaled by `1 - τ`, `τ` solving
/// `||T f0|| = 1 - slack`.
fn try_ucx(rng: &mut ChaCha8Rng, spec: &InstanceSpec) -> Result<Option<(UcxInstance, f64)>> {
    let raw = GeneralOperator::new(
        uniform_matrix(rng, spec.target_dim, spec.source_dim),
        NormKind::Sup,
        NormKind::Euclid,
    )?;
    let (norm, sigma) = raw.oracle_norm()?;
    if norm == 0.0 {
        return Ok(None);
    }
    let t = raw.scale(1.0 / norm);
    let a = t.apply(&sigma)?;
    let mut f0 = sigma.clone();
    if spec.slack > 0.0 {
        // ||a - τ σ_k c_k||² = (1 - slack)² with b = σ_k <a, c_k>, cc = ||c_k||².
        let d = 1.0 - (1.0 - spec.slack).powi(2);
        let mut options: Vec<(usize, f64, f64)> = (0..t.source_dim())
            .map(|k| {
                let c = t.column(k);
                let b = sigma[k] * a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
                (k, b, c.iter().map(|v| v * v).sum())
            })
            .collect();
        options.sort_by(|x, y| y.1.total_cmp(&x.1));
        let root = options.iter().find_map(|&(k, b, cc)| {
            let disc = b * b - cc * d;
            if b <= 0.0 || disc < 0.0 {
                return None;
            }
            let tau = d / (b + disc.sqrt());
            (tau > 0.0 && tau <= 2.0).then_some((k, tau))
        });
        let Some((k, tau)) = root else {
            return Ok(None);
        };
        f0[k] = sigma[k] * (1.0 - tau);
    }
    let slack = 1.0 - t.image_norm(&f0)?;
    Ok(Some((
        UcxInstance {
            operator: t,
            f0: Func::new(f0)?,
            meta: None,
        },
        slack,
    )))
}

/// Rows decaying like `0.3^k`, normalised to norm one; `x0` is the unit
/// point where the largest row attains, pushed along a random direction by
/// bisection until the slack matches.
fn try_predual(rng: &mut ChaCha8Rng, spec: &InstanceSpec) -> Result<Option<(PredualInstance, f64)>> {
    let norm = spec.source_norm.unwrap_or(NormKind::Euclid);
    if norm.is_sup() && spec.source_dim > 20 {
        return Err(infeasible(spec, "sup source beyond the oracle cap"));
    }
    let mut rows = uniform_matrix(rng, spec.target_dim, spec.source_dim);
    for (k, row) in rows.iter_mut().enumerate() {
        let f = ROW_DECAY.powi(k as i32);
        row.iter_mut().for_each(|v| *v *= f);
    }
    let raw = GeneralOperator::new(rows, norm, NormKind::Sup)?;
    let op_norm = raw.operator_norm()?;
    if op_norm == 0.0 {
        return Ok(None);
    }
    let t = raw.scale(1.0 / op_norm);
    let dual = norm.dual();
    let top = (0..t.target_dim()).fold(0, |b, i| if dual.norm(t.row(i)) > dual.norm(t.row(b)) { i } else { b });
    let peak = norm.attaining_point(t.row(top), None);
    let slack_at = |x: &[f64]| -> Result<f64> { Ok(1.0 - sup_norm_of(&t.apply(x)?)) };
    let x0 = if spec.slack == 0.0 {
        peak
    } else {
        let dir: Vec<f64> = (0..spec.source_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let point = |tau: f64| -> Vec<f64> {
            let x: Vec<f64> = peak.iter().zip(&dir).map(|(p, d)| p + tau * d).collect();
            let n = norm.norm(&x);
            x.into_iter().map(|v| v / n).collect()
        };
        let mut hi = 1.0;
        while slack_at(&point(hi))? <= spec.slack {
            hi *= 2.0;
            if hi > 1e6 {
                return Ok(None);
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slack_at(&point(mid))? <= spec.slack {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (point(lo), point(hi));
        if (slack_at(&a)? - spec.slack).abs() <= (slack_at(&b)? - spec.slack).abs() {
            a
        } else {
            b
        }
    };
    if x0.iter().any(|v| !v.is_finite()) || tv_norm_of(&x0) == 0.0 {
        return Ok(None);
    }
    let slack = slack_at(&x0)?;
    Ok(Some((PredualInstance { operator: t, x0, meta: None }, slack)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pipeline: Pipeline, slack: f64) -> InstanceSpec {
        InstanceSpec {
            pipeline,
            source_dim: 4,
            target_dim: 3,
            slack,
            seed: 7,
            source_norm: None,
        }
    }

    #[test]
    fn zero_slack_gives_sign_pattern() {
        let Instance::CkCs(i) = gen_instance(&spec(Pipeline::CkCs, 0.0)).unwrap() else {
            panic!("wrong pipeline");
        };
        assert!(i.f0.values().iter().all(|v| v.abs() == 1.0));
        assert!(i.meta.unwrap().slack.abs() <= SLACK_MATCH);
    }

    #[test]
    fn slack_is_realised() {
        for p in Pipeline::ALL {
            let inst = gen_instance(&spec(p, 1e-4)).unwrap();
            let meta = inst.meta().unwrap();
            assert!((meta.slack - 1e-4).abs() <= SLACK_MATCH, "{p}: {}", meta.slack);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        for p in Pipeline::ALL {
            let a = serde_json::to_string(&gen_instance(&spec(p, 1e-3)).unwrap()).unwrap();
            let b = serde_json::to_string(&gen_instance(&spec(p, 1e-3)).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(gen_instance(&spec(Pipeline::CkCs, 1.5)).is_err());
        let mut s = spec(Pipeline::Ucx, 0.1);
        s.source_dim = 1;
        assert!(gen_instance(&s).is_err());
    }
}
