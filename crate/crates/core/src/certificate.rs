use serde::{Deserialize, Serialize};

/// Absolute tolerance for the norm equalities of a certificate.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Witness of a norm-attaining correction: the new operator attains its unit
/// norm at `witness`, which lies within `epsilon` of the starting point, and
/// the operator moved by less than `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpbCertificate {
    pub witness: Vec<f64>,
    /// `||S witness||`.
    pub attained_norm: f64,
    /// `||S||`.
    pub operator_norm: f64,
    /// `||witness - x0||`.
    pub dist_point: f64,
    /// `||S - T||`.
    pub dist_operator: f64,
    pub epsilon: f64,
    pub tol: f64,
}

impl BpbCertificate {
    /// Every claim of the certificate that fails, as a readable line.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            self.attained_norm,
            self.operator_norm,
            self.dist_point,
            self.dist_operator,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            out.push("non-finite certificate field".to_string());
            return out;
        }
        if (self.attained_norm - self.operator_norm).abs() > self.tol {
            out.push(format!(
                "not attained: ||S w|| = {:.17e} but ||S|| = {:.17e}",
                self.attained_norm, self.operator_norm
            ));
        }
        if (self.operator_norm - 1.0).abs() > self.tol {
            out.push(format!("||S|| = {:.17e} is not 1", self.operator_norm));
        }
        if self.dist_point >= self.epsilon {
            out.push(format!(
                "point moved {:.17e} >= epsilon {}",
                self.dist_point, self.epsilon
            ));
        }
        if self.dist_operator >= self.epsilon {
            out.push(format!(
                "operator moved {:.17e} >= epsilon {}",
                self.dist_operator, self.epsilon
            ));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}
