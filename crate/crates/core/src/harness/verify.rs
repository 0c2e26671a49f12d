//! Independent re-verification of a pipeline's claims.
//!
//! Every norm is recomputed from the instance and the claimed operator and
//! witness alone: `kernel_norm` for kernels, the sign-vector oracle for
//! sup-normed sources, and the largest dual row norm for sup-normed targets.
//! Nothing computed inside a pipeline is reused.

use serde::{Deserialize, Serialize};

use super::{run, Instance, RunOptions, Solution, SolvedOperator};
use crate::error::{BpbError, Result};
use crate::operator::{GeneralOperator, NormKind};
use crate::spaces::{kernel_norm, sup_norm_of, Func, Kernel};

/// Values recomputed from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recomputed {
    pub witness_norm: f64,
    pub operator_norm: f64,
    pub attained_norm: f64,
    pub dist_point: f64,
    pub dist_operator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub failures: Vec<String>,
    pub recomputed: Recomputed,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn as_kernel(op: &SolvedOperator) -> Result<Kernel> {
    match op {
        SolvedOperator::Kernel(k) => Ok(k.clone()),
        SolvedOperator::General(g) if g.source_norm().is_sup() && g.target_norm().is_sup() => {
            Kernel::new(g.matrix().to_vec())
        }
        SolvedOperator::General(_) => Err(BpbError::InvalidInput("expected a kernel".into())),
    }
}

fn as_general(op: &SolvedOperator, like: &GeneralOperator) -> Result<GeneralOperator> {
    let g = match op {
        SolvedOperator::General(g) => g.clone(),
        SolvedOperator::Kernel(k) => GeneralOperator::from_kernel(k),
    };
    if g.source_norm() != like.source_norm() || g.target_norm() != like.target_norm() {
        return Err(BpbError::InvalidInput(format!(
            "operator maps {} -> {}, instance maps {} -> {}",
            g.source_norm(),
            g.target_norm(),
            like.source_norm(),
            like.target_norm()
        )));
    }
    Ok(g)
}

/// Exact norm of a general operator by the oracle matching its norms.
fn exact_norm(a: &GeneralOperator) -> Result<f64> {
    if a.source_norm().is_sup() {
        Ok(a.oracle_norm()?.0)
    } else if a.target_norm().is_sup() {
        let dual = a.source_norm().dual();
        Ok(a.matrix().iter().fold(0.0, |acc: f64, r| acc.max(dual.norm(r))))
    } else {
        Err(BpbError::Unsupported(format!(
            "no exact norm for {} -> {}",
            a.source_norm(),
            a.target_norm()
        )))
    }
}

fn recompute(instance: &Instance, solution: &Solution) -> Result<Recomputed> {
    let w = &solution.certificate.witness;
    let (n, m) = instance.dims();
    if w.len() != n {
        return Err(BpbError::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    match instance {
        Instance::CkCs(i) => {
            let s = as_kernel(&solution.operator)?;
            if s.source_dim() != n || s.target_dim() != m {
                return Err(BpbError::InvalidInput("operator shape differs from the instance".into()));
            }
            let wf = Func::new(w.clone())?;
            Ok(Recomputed {
                witness_norm: sup_norm_of(w),
                operator_norm: kernel_norm(&s),
                attained_norm: s.apply(&wf)?.sup_norm(),
                dist_point: sup_norm_of(&diff(w, i.f0.values())),
                dist_operator: kernel_norm(&s.sub(&i.kernel)?),
            })
        }
        Instance::Ucx(i) => general(&i.operator, &as_general(&solution.operator, &i.operator)?, w, i.f0.values()),
        Instance::Predual(i) => general(&i.operator, &as_general(&solution.operator, &i.operator)?, w, &i.x0),
    }
}

fn general(t: &GeneralOperator, s: &GeneralOperator, w: &[f64], x0: &[f64]) -> Result<Recomputed> {
    if s.source_dim() != t.source_dim() || s.target_dim() != t.target_dim() {
        return Err(BpbError::InvalidInput("operator shape differs from the instance".into()));
    }
    let src: NormKind = t.source_norm();
    Ok(Recomputed {
        witness_norm: src.norm(w),
        operator_norm: exact_norm(s)?,
        attained_norm: s.image_norm(w)?,
        dist_point: src.norm(&diff(w, x0)),
        dist_operator: exact_norm(&s.sub(t)?)?,
    })
}

/// Check every claim of `solution` against `instance` at tolerance `tol`.
/// Malformed solutions (wrong shapes or norms) are reported as failures.
pub fn verify(instance: &Instance, solution: &Solution, tol: f64) -> VerifyReport {
    let nan = f64::NAN;
    let blank = Recomputed {
        witness_norm: nan,
        operator_norm: nan,
        attained_norm: nan,
        dist_point: nan,
        dist_operator: nan,
    };
    let mut failures = Vec::new();
    if solution.pipeline != instance.pipeline() {
        failures.push(format!(
            "solution is for {}, instance is for {}",
            solution.pipeline,
            instance.pipeline()
        ));
    }
    let r = match recompute(instance, solution) {
        Ok(r) => r,
        Err(e) => {
            failures.push(format!("malformed solution: {e}"));
            return VerifyReport {
                ok: false,
                failures,
                recomputed: blank,
            };
        }
    };
    let eps = solution.epsilon;
    let c = &solution.certificate;
    let all = [r.witness_norm, r.operator_norm, r.attained_norm, r.dist_point, r.dist_operator];
    if all.iter().any(|v| !v.is_finite()) {
        failures.push("non-finite recomputed value".into());
    }
    if (r.witness_norm - 1.0).abs() > tol {
        failures.push(format!("||witness|| = {:.17e} is not 1", r.witness_norm));
    }
    if (r.operator_norm - 1.0).abs() > tol {
        failures.push(format!("||S|| = {:.17e} is not 1", r.operator_norm));
    }
    if (r.attained_norm - r.operator_norm).abs() > tol {
        failures.push(format!(
            "not attained: ||S w|| = {:.17e}, ||S|| = {:.17e}",
            r.attained_norm, r.operator_norm
        ));
    }
    if !(r.dist_point < eps) {
        failures.push(format!("||w - x0|| = {:.17e} >= epsilon {eps}", r.dist_point));
    }
    if !(r.dist_operator < eps) {
        failures.push(format!("||S - T|| = {:.17e} >= epsilon {eps}", r.dist_operator));
    }
    if c.epsilon != eps {
        failures.push(format!("certificate epsilon {} differs from {eps}", c.epsilon));
    }
    let claims = [
        ("operator_norm", c.operator_norm, r.operator_norm),
        ("attained_norm", c.attained_norm, r.attained_norm),
        ("dist_point", c.dist_point, r.dist_point),
        ("dist_operator", c.dist_operator, r.dist_operator),
    ];
    for (name, claimed, actual) in claims {
        if !((claimed - actual).abs() <= tol) {
            failures.push(format!("claimed {name} {claimed:.17e} but recomputed {actual:.17e}"));
        }
    }
    VerifyReport {
        ok: failures.is_empty(),
        failures,
        recomputed: r,
    }
}

/// Run the instance's pipeline and verify the result independently.
/// Pipeline errors (including precondition rejections) are returned as
/// errors; a failed verification is reported in the returned report.
pub fn run_and_verify(instance: &Instance, epsilon: f64, opts: &RunOptions) -> Result<(Solution, VerifyReport)> {
    let solution = run(instance, epsilon, opts)?;
    let report = verify(instance, &solution, opts.tol);
    Ok((solution, report))
}

/// A deliberate corruption of a solution. Each one provably breaks the
/// certificate: scaling moves a unit norm away from one, negation moves the
/// witness or operator at least `2 - ε` from the start, and a tampered
/// claim no longer matches the recomputed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    ScaleWitness(f64),
    NegateWitness,
    ScaleOperator(f64),
    NegateOperator,
    /// Add this offset to the claimed attained norm.
    TamperClaim(f64),
}

pub fn inject_fault(solution: &Solution, fault: Fault) -> Solution {
    let mut out = solution.clone();
    let scale_op = |op: &SolvedOperator, k: f64| match op {
        SolvedOperator::Kernel(s) => SolvedOperator::Kernel(s.scale(k)),
        SolvedOperator::General(s) => SolvedOperator::General(s.scale(k)),
    };
    match fault {
        Fault::ScaleWitness(k) => out.certificate.witness.iter_mut().for_each(|v| *v *= k),
        Fault::NegateWitness => out.certificate.witness.iter_mut().for_each(|v| *v = -*v),
        Fault::ScaleOperator(k) => out.operator = scale_op(&solution.operator, k),
        Fault::NegateOperator => out.operator = scale_op(&solution.operator, -1.0),
        Fault::TamperClaim(d) => out.certificate.attained_norm += d,
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::CkCsInstance;

    fn instance() -> Instance {
        Instance::CkCs(CkCsInstance {
            kernel: Kernel::new(vec![vec![0.6, 0.4], vec![0.3, 0.5]]).unwrap(),
            f0: Func::new(vec![1.0, 0.999]).unwrap(),
            meta: None,
        })
    }

    #[test]
    fn honest_solution_verifies() {
        let (_, report) = run_and_verify(&instance(), 0.5, &RunOptions::default()).unwrap();
        assert!(report.ok, "{:?}", report.failures);
    }

    #[test]
    fn each_fault_is_caught() {
        let inst = instance();
        let sol = run(&inst, 0.5, &RunOptions::default()).unwrap();
        for fault in [
            Fault::ScaleWitness(0.99),
            Fault::NegateWitness,
            Fault::ScaleOperator(1.01),
            Fault::NegateOperator,
            Fault::TamperClaim(1e-6),
        ] {
            let report = verify(&inst, &inject_fault(&sol, fault), 1e-9);
            assert!(!report.ok, "{fault:?} slipped through");
        }
    }

    #[test]
    fn mismatched_shape_is_a_failure() {
        let inst = instance();
        let mut sol = run(&inst, 0.5, &RunOptions::default()).unwrap();
        sol.certificate.witness.push(1.0);
        assert!(!verify(&inst, &sol, 1e-9).ok);
    }
}
