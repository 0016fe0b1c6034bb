use super::tape::{Gradients, ParamId};
use super::tensor::DenseMatrix;
use crate::error::{GqeError, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is (numerically) zero are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index where the maximum occurred.
    pub worst: Option<(ParamId, usize)>,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares tape gradients of `f` at `params` with central differences of
/// step `eps` over every parameter entry.
///
/// `f` returns the scalar value together with its tape gradients; only the
/// value is used at the perturbed points.
pub fn grad_check<F>(mut f: F, params: &[DenseMatrix], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[DenseMatrix]) -> Result<(f64, Gradients)>,
{
    let (f0, analytic) = f(params)?;
    if !f0.is_finite() {
        return Err(GqeError::Numeric(format!("f = {f0} at the probe point")));
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for t in 0..params.len() {
        let id = ParamId(t);
        let grad = analytic.get(id);
        for i in 0..params[t].len() {
            let orig = params[t].as_slice()[i];
            probe[t].as_mut_slice()[i] = orig + eps;
            let (plus, _) = f(&probe)?;
            probe[t].as_mut_slice()[i] = orig - eps;
            let (minus, _) = f(&probe)?;
            probe[t].as_mut_slice()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(GqeError::Numeric(format!(
                    "f non-finite near parameter {t}[{i}]"
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.map_or(0.0, |g| g[i]);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((id, i));
            }
        }
    }
    Ok(report)
}
