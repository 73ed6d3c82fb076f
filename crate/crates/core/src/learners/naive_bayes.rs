use serde::{Deserialize, Serialize};

use super::{check_labels, SparseExample};
use crate::error::{Error, Result};
use crate::features::SparseVector;

/// Binary (label vs rest) multinomial Naive Bayes for every label.
///
/// Only sufficient statistics are stored, so fitting is additive over
/// batches: per-label document and feature-mass counts for the positive
/// class, plus corpus totals from which the negative class follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    alpha: f64,
    num_labels: usize,
    dim: usize,
    documents: u64,
    positive_documents: Vec<u64>,
    /// `num_labels × dim`, row-major.
    positive_mass: Vec<f64>,
    total_mass: Vec<f64>,
    positive_sum: Vec<f64>,
    grand_sum: f64,
}

impl NaiveBayesModel {
    pub fn new(num_labels: usize, dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("smoothing factor must be positive, got {alpha}")));
        }
        Ok(Self {
            alpha,
            num_labels,
            dim,
            documents: 0,
            positive_documents: vec![0; num_labels],
            positive_mass: vec![0.0; num_labels * dim],
            total_mass: vec![0.0; dim],
            positive_sum: vec![0.0; num_labels],
            grand_sum: 0.0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn documents(&self) -> u64 {
        self.documents
    }

    /// Accumulates one batch of counts.
    pub fn partial_fit(&mut self, batch: &[SparseExample]) -> Result<()> {
        check_labels(batch, self.num_labels, self.dim)?;
        for ex in batch {
            self.documents += 1;
            let mass: f64 = ex.features.values().iter().sum();
            self.grand_sum += mass;
            for (f, v) in ex.features.iter() {
                self.total_mass[f] += v;
            }
            for &l in &ex.labels {
                self.positive_documents[l] += 1;
                self.positive_sum[l] += mass;
                let row = &mut self.positive_mass[l * self.dim..(l + 1) * self.dim];
                for (f, v) in ex.features.iter() {
                    row[f] += v;
                }
            }
        }
        Ok(())
    }

    fn class_masses(&self, label: usize) -> (f64, f64) {
        (self.positive_sum[label], self.grand_sum - self.positive_sum[label])
    }

    /// Smoothed per-feature log likelihoods of the positive (`true`) or
    /// negative class of `label`.
    pub fn log_likelihoods(&self, label: usize, positive: bool) -> Vec<f64> {
        let row = &self.positive_mass[label * self.dim..(label + 1) * self.dim];
        let (pos, neg) = self.class_masses(label);
        let denom = if positive { pos } else { neg } + self.alpha * self.dim as f64;
        row.iter()
            .zip(&self.total_mass)
            .map(|(&p, &t)| {
                let count = if positive { p } else { t - p };
                ((count + self.alpha) / denom).ln()
            })
            .collect()
    }

    /// Posterior probability of each label being present.
    pub fn score(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if self.documents == 0 {
            return Err(Error::NotFitted);
        }
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        let smoothing = self.alpha * self.dim as f64;
        let scores = (0..self.num_labels)
            .map(|l| {
                let n_pos = self.positive_documents[l];
                let n_neg = self.documents - n_pos;
                if n_pos == 0 {
                    return 0.0;
                }
                if n_neg == 0 {
                    return 1.0;
                }
                let row = &self.positive_mass[l * self.dim..(l + 1) * self.dim];
                let (pos_mass, neg_mass) = self.class_masses(l);
                let mut log_odds = (n_pos as f64).ln() - (n_neg as f64).ln();
                let (pos_norm, neg_norm) = ((pos_mass + smoothing).ln(), (neg_mass + smoothing).ln());
                for (f, v) in x.iter() {
                    let lp = (row[f] + self.alpha).ln() - pos_norm;
                    let ln = (self.total_mass[f] - row[f] + self.alpha).ln() - neg_norm;
                    log_odds += v * (lp - ln);
                }
                sigmoid(log_odds)
            })
            .collect();
        Ok(scores)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits a fresh model over all `batches`.
pub fn nb_fit<'a>(
    batches: impl IntoIterator<Item = &'a [SparseExample]>,
    num_labels: usize,
    dim: usize,
    alpha: f64,
) -> Result<NaiveBayesModel> {
    let mut model = NaiveBayesModel::new(num_labels, dim, alpha)?;
    for batch in batches {
        model.partial_fit(batch)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(pairs: &[(u32, f64)], labels: &[usize], dim: usize) -> SparseExample {
        SparseExample {
            features: SparseVector::from_pairs(pairs.to_vec(), dim).unwrap(),
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn hand_posterior() {
        // doc A: f0×2, f1×1, label 0; doc B: f1×1, f2×3, no label.
        let data = vec![ex(&[(0, 2.0), (1, 1.0)], &[0], 3), ex(&[(1, 1.0), (2, 3.0)], &[], 3)];
        let m = nb_fit([data.as_slice()], 1, 3, 1.0).unwrap();
        // Positive class: counts (2,1,0), total 3; negative (0,1,3), total 4.
        let theta_pos = [3.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0];
        let theta_neg = [1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0];
        let x = [1.0, 0.0, 2.0];
        let joint = |theta: &[f64; 3]| 0.5 * (0..3).map(|f| theta[f].powf(x[f])).product::<f64>();
        let (jp, jn) = (joint(&theta_pos), joint(&theta_neg));
        let want = jp / (jp + jn);
        let got = m.score(&SparseVector::from_pairs(vec![(0, 1.0), (2, 2.0)], 3).unwrap()).unwrap();
        assert!((got[0] - want).abs() < 1e-12, "{} vs {want}", got[0]);
    }

    #[test]
    fn likelihood_rows_are_distributions() {
        let data = vec![ex(&[(0, 2.0), (1, 1.0)], &[0, 1], 4), ex(&[(3, 5.0)], &[1], 4), ex(&[(2, 1.0)], &[], 4)];
        let m = nb_fit([data.as_slice()], 2, 4, 0.1).unwrap();
        for l in 0..2 {
            for pos in [true, false] {
                let s: f64 = m.log_likelihoods(l, pos).iter().map(|v| v.exp()).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn always_present_label_scores_one() {
        let data = vec![ex(&[(0, 1.0)], &[0], 2), ex(&[(1, 1.0)], &[0], 2)];
        let m = nb_fit([data.as_slice()], 1, 2, 1.0).unwrap();
        assert_eq!(m.score(&SparseVector::from_pairs(vec![(1, 4.0)], 2).unwrap()).unwrap(), [1.0]);
    }

    #[test]
    fn unfitted_scoring_fails() {
        let m = NaiveBayesModel::new(2, 3, 1.0).unwrap();
        assert!(matches!(m.score(&SparseVector::empty(3)), Err(Error::NotFitted)));
        assert!(NaiveBayesModel::new(2, 3, 0.0).is_err());
    }

    #[test]
    fn batch_order_independent() {
        let data: Vec<SparseExample> = (0..30)
            .map(|i| ex(&[((i % 5) as u32, 1.0 + (i % 3) as f64), (5, 1.0)], &[i % 3], 6))
            .collect();
        let forward: Vec<&[SparseExample]> = data.chunks(7).collect();
        let mut backward = forward.clone();
        backward.reverse();
        assert_eq!(nb_fit(forward, 3, 6, 0.5).unwrap(), nb_fit(backward, 3, 6, 0.5).unwrap());
    }
}
