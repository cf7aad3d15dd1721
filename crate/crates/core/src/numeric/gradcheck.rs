use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};

/// Tolerance used across the crate for analytic-vs-numeric gradient agreement.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter_index: usize,
    pub passed: bool,
}

/// Central-difference comparison of `analytic_grad` against `loss_fn` around `params`.
///
/// Relative error per coordinate is `|fd - an| / max(1, |fd|, |an|)`; the
/// report carries the worst coordinate and whether it is within `tolerance`.
pub fn finite_difference_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic_grad: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(epsilon > 0.0) {
        return Err(VeError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if params.len() != analytic_grad.len() {
        return Err(VeError::shape(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            analytic_grad.len()
        )));
    }
    let mut probe = params.to_vec();
    let mut worst = (0.0_f64, 0_usize);
    for i in 0..params.len() {
        let original = probe[i];
        probe[i] = original + epsilon;
        let plus = loss_fn(&probe);
        probe[i] = original - epsilon;
        let minus = loss_fn(&probe);
        probe[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(VeError::Numeric(format!(
                "non-finite loss while probing parameter {i}"
            )));
        }
        let fd = (plus - minus) / (2.0 * epsilon);
        let an = analytic_grad[i];
        let rel = (fd - an).abs() / 1.0_f64.max(fd.abs()).max(an.abs());
        if rel > worst.0 || rel.is_nan() {
            worst = (rel, i);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_parameter_index: worst.1,
        passed: worst.0 <= tolerance,
    })
}
