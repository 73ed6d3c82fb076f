use serde::Serialize;

use super::NeuralModel;
use crate::error::Result;
use crate::features::EmbeddingSequence;

/// Outcome of comparing analytic and central finite-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub num_params: usize,
    pub max_relative_error: f64,
    pub worst_param: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Denominator floor for the relative error, so that parameters with a
/// vanishing gradient are judged on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Checks every parameter with step `h`. The relative error of one
/// coordinate is `|a − n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn gradient_check(model: &NeuralModel, seq: &EmbeddingSequence, targets: &[f64], h: f64) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradient(seq, targets)?;
    let mut params = model.params().to_vec();
    let mut report = GradCheckReport {
        num_params: params.len(),
        max_relative_error: 0.0,
        worst_param: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let up = model.loss_at(&params, seq, targets)?;
        params[i] = orig - h;
        let down = model.loss_at(&params, seq, targets)?;
        params[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_param = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
