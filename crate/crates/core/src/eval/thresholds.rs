use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::error::{Error, Result};

/// Per-label decision thresholds in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidArgument(format!("threshold {v} outside (0, 1)")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `{0.05, 0.10, ..., 0.95}`.
pub fn default_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

fn binary_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// Independently per label, the grid value maximizing that label's F1 on
/// the validation set (ties go to the lowest threshold). Labels without
/// validation positives get 0.5.
pub fn tune_thresholds(validation: &PredictionSet, grid: &[f64]) -> Result<ThresholdVector> {
    if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
        return Err(Error::InvalidArgument("threshold grid must be a non-empty subset of (0, 1)".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let n = validation.num_labels;
    let mut is_gold = vec![vec![false; n]; validation.len()];
    for (row, g) in is_gold.iter_mut().zip(&validation.gold) {
        for &l in g {
            row[l] = true;
        }
    }
    let thresholds = (0..n)
        .map(|label| {
            let positives = is_gold.iter().filter(|row| row[label]).count();
            if positives == 0 {
                return 0.5;
            }
            let mut best = (f64::NEG_INFINITY, 0.5);
            for &t in &grid {
                let (mut tp, mut fp) = (0, 0);
                for (s, row) in validation.scores.iter().zip(&is_gold) {
                    if s[label] >= t {
                        if row[label] {
                            tp += 1;
                        } else {
                            fp += 1;
                        }
                    }
                }
                let f1 = binary_f1(tp, fp, positives - tp);
                if f1 > best.0 {
                    best = (f1, t);
                }
            }
            best.1
        })
        .collect();
    ThresholdVector::new(thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = default_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[18], 0.95);
    }

    #[test]
    fn indicator_scores_tune_to_perfect() {
        let gold = vec![vec![0], vec![1], vec![0, 1]];
        let scores = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let p = PredictionSet::new(2, vec!["a".into(), "b".into(), "c".into()], scores, gold).unwrap();
        let t = tune_thresholds(&p, &[0.3, 0.5, 0.7]).unwrap();
        // Every grid value achieves F1 = 1; lowest wins.
        assert_eq!(t.values(), [0.3, 0.3]);
        let m = crate::eval::compute_metrics(&p, &t).unwrap();
        assert_eq!(m.micro_f1, 1.0);
    }

    #[test]
    fn planted_threshold_found_by_exhaustive_grid() {
        // Positives score 0.3, negatives 0.2: only thresholds in (0.2, 0.3] separate.
        let scores = vec![vec![0.3], vec![0.3], vec![0.2], vec![0.2], vec![0.1]];
        let gold = vec![vec![0], vec![0], vec![], vec![], vec![]];
        let ids = (0..5).map(|i| i.to_string()).collect();
        let p = PredictionSet::new(1, ids, scores, gold).unwrap();
        let grid = [0.1, 0.2, 0.25, 0.35, 0.5];
        let t = tune_thresholds(&p, &grid).unwrap();
        assert_eq!(t.values(), [0.25]);
    }

    #[test]
    fn no_positives_default_half() {
        let p = PredictionSet::new(1, vec!["a".into()], vec![vec![0.9]], vec![vec![]]).unwrap();
        assert_eq!(tune_thresholds(&p, &default_grid()).unwrap().values(), [0.5]);
        assert!(tune_thresholds(&p, &[]).is_err());
        assert!(tune_thresholds(&p, &[1.0]).is_err());
    }
}
