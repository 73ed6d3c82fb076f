use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::naive_bayes::sigmoid;
use super::{check_labels, SparseExample};
use crate::error::{Error, Result};
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// L2 regularization strength.
    pub alpha: f64,
    pub epochs: usize,
    /// Minimum improvement of the mean epoch loss that resets patience.
    pub tolerance: f64,
    /// Consecutive epochs without improvement before stopping.
    pub patience: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            epochs: 100,
            tolerance: 1e-3,
            patience: 5,
        }
    }
}

/// Smallest regularization used for the step-size schedule, so that an
/// unregularized fit still gets a decaying learning rate.
const SCHEDULE_ALPHA_FLOOR: f64 = 1e-6;

/// Independent binary logistic regressions, one per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    num_labels: usize,
    dim: usize,
    alpha: f64,
    /// `num_labels × dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    /// Epochs actually run per label before early stopping.
    epochs_run: Vec<usize>,
}

impl LogisticRegressionModel {
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self, label: usize) -> &[f64] {
        &self.weights[label * self.dim..(label + 1) * self.dim]
    }

    pub fn bias(&self, label: usize) -> f64 {
        self.bias[label]
    }

    pub fn epochs_run(&self) -> &[usize] {
        &self.epochs_run
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn score(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok((0..self.num_labels)
            .map(|l| sigmoid(x.dot(self.weights(l)) + self.bias[l]))
            .collect())
    }
}

/// `ln(1 + e^{-z})` without overflow.
fn log_loss(z: f64) -> f64 {
    if z > 18.0 {
        (-z).exp()
    } else if z < -18.0 {
        -z
    } else {
        (-z).exp().ln_1p()
    }
}

/// `d/dp ln(1 + e^{-y p})`.
fn dloss(p: f64, y: f64) -> f64 {
    let z = p * y;
    if z > 18.0 {
        -y * (-z).exp()
    } else if z < -18.0 {
        -y
    } else {
        -y / (1.0 + z.exp())
    }
}

/// Full-batch regularized objective for one label and its gradient:
/// `mean_i ln(1 + exp(-y_i (w·x_i + b))) + α/2 ‖w‖²` with `y_i ∈ {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrObjective {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

impl LrObjective {
    pub fn evaluate(data: &[SparseExample], label: usize, weights: &[f64], bias: f64, alpha: f64) -> Self {
        let n = data.len().max(1) as f64;
        let mut loss = 0.0;
        let mut grad_weights: Vec<f64> = weights.iter().map(|w| alpha * w).collect();
        let mut grad_bias = 0.0;
        for ex in data {
            let y = if ex.labels.contains(&label) { 1.0 } else { -1.0 };
            let p = ex.features.dot(weights) + bias;
            loss += log_loss(y * p) / n;
            let g = dloss(p, y) / n;
            for (f, v) in ex.features.iter() {
                grad_weights[f] += g * v;
            }
            grad_bias += g;
        }
        loss += 0.5 * alpha * weights.iter().map(|w| w * w).sum::<f64>();
        Self {
            loss,
            grad_weights,
            grad_bias,
        }
    }
}

struct LabelFit {
    weights: Vec<f64>,
    bias: f64,
    epochs: usize,
}

fn fit_label(data: &[&SparseExample], label: usize, dim: usize, config: &LogisticConfig, seed: u64) -> Result<LabelFit> {
    let alpha = config.alpha;
    let schedule_alpha = alpha.max(SCHEDULE_ALPHA_FLOOR);
    // Bottou's heuristic: the initial step equals a typical weight scale.
    let typw = (1.0 / schedule_alpha.sqrt()).sqrt();
    let t0 = 1.0 / (typw * schedule_alpha);

    let mut v = vec![0.0; dim];
    let mut wscale = 1.0;
    let mut bias = 0.0;
    let mut t = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = 0;
    let n = data.len() as f64;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum_loss = 0.0;
        for &i in &order {
            let ex = data[i];
            let y = if ex.labels.contains(&label) { 1.0 } else { -1.0 };
            let p = wscale * ex.features.dot(&v) + bias;
            let loss = log_loss(y * p);
            if !loss.is_finite() || !p.is_finite() {
                return Err(Error::Diverged(format!(
                    "label {label}, epoch {}: non-finite loss (alpha {alpha}, step {t}); lower the learning rate or raise alpha",
                    epoch + 1
                )));
            }
            sum_loss += loss;
            let eta = 1.0 / (schedule_alpha * (t0 + t - 1.0));
            let update = -eta * dloss(p, y);
            if update != 0.0 {
                let step = update / wscale;
                for (f, x) in ex.features.iter() {
                    v[f] += step * x;
                }
                bias += update;
            }
            wscale *= (1.0 - eta * alpha).max(0.0);
            if wscale < 1e-9 {
                for w in &mut v {
                    *w *= wscale;
                }
                wscale = 1.0;
            }
            t += 1.0;
        }
        epochs = epoch + 1;
        let mean_loss = sum_loss / n;
        if mean_loss > best_loss - config.tolerance {
            stale += 1;
        } else {
            stale = 0;
        }
        best_loss = best_loss.min(mean_loss);
        if stale >= config.patience {
            break;
        }
    }
    for w in &mut v {
        *w *= wscale;
    }
    if v.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::Diverged(format!("label {label}: non-finite weights after training")));
    }
    Ok(LabelFit { weights: v, bias, epochs })
}

/// Per-sample SGD over the shuffled union of `batches`, one binary problem
/// per label, with step size `1 / (α (t + t0))`.
pub fn lr_fit<'a>(
    batches: impl IntoIterator<Item = &'a [SparseExample]>,
    num_labels: usize,
    dim: usize,
    config: &LogisticConfig,
    seed: u64,
) -> Result<LogisticRegressionModel> {
    if !(config.alpha >= 0.0 && config.alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {}", config.alpha)));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let mut data: Vec<&SparseExample> = Vec::new();
    for batch in batches {
        check_labels(batch, num_labels, dim)?;
        data.extend(batch.iter());
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("logistic regression needs at least one example".into()));
    }
    let fits: Vec<LabelFit> = (0..num_labels)
        .into_par_iter()
        .map(|l| fit_label(&data, l, dim, config, seed))
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(num_labels * dim);
    let mut bias = Vec::with_capacity(num_labels);
    let mut epochs_run = Vec::with_capacity(num_labels);
    for fit in fits {
        weights.extend(fit.weights);
        bias.push(fit.bias);
        epochs_run.push(fit.epochs);
    }
    Ok(LogisticRegressionModel {
        num_labels,
        dim,
        alpha: config.alpha,
        weights,
        bias,
        epochs_run,
    })
}
