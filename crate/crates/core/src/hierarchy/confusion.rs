use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{PredictionSet, ThresholdVector};
use crate::taxonomy::EmotionTaxonomy;

/// Which predicted labels of an example count towards its gold rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionMode {
    /// The full decided label set.
    #[default]
    Decided,
    /// Only the highest-scoring label.
    Argmax,
}

/// Row-normalized `gold × predicted` proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    /// Row-major `n × n`.
    values: Vec<f64>,
    /// Examples contributing to each row.
    observations: Vec<u64>,
}

impl ConfusionMatrix {
    /// From unnormalized rows; every row with mass is normalized to sum 1.
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<f64>>, observations: Vec<u64>) -> Result<Self> {
        let n = labels.len();
        if counts.len() != n || observations.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: counts.len().min(observations.len()),
            });
        }
        let mut values = Vec::with_capacity(n * n);
        for row in &counts {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidArgument("confusion counts must be finite and non-negative".into()));
            }
            let total: f64 = row.iter().sum();
            values.extend(row.iter().map(|&v| if total > 0.0 { v / total } else { 0.0 }));
        }
        Ok(Self {
            labels,
            values,
            observations,
        })
    }

    /// The identity matrix with one observation per row.
    pub fn identity(labels: Vec<String>) -> Self {
        let n = labels.len();
        let rows = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self::from_counts(labels, rows, vec![1; n]).expect("identity is well-formed")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.len()..(i + 1) * self.len()]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn observations(&self) -> &[u64] {
        &self.observations
    }

    /// Rows that never received any prediction mass.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.row(i).iter().all(|&v| v == 0.0)).collect()
    }

    /// CSV with a header row and a leading column of label names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold");
        for l in &self.labels {
            let _ = write!(out, ",{}", csv_field(l));
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&csv_field(&self.labels[i]));
            for v in self.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Counts, for every example and each of its gold labels `i`, one hit in
/// `(i, j)` per predicted label `j`, then normalizes rows.
pub fn build_confusion(
    predictions: &PredictionSet,
    thresholds: &ThresholdVector,
    labels: Vec<String>,
    mode: ConfusionMode,
) -> Result<ConfusionMatrix> {
    let n = predictions.num_labels;
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let decided: Vec<Vec<usize>> = match mode {
        ConfusionMode::Decided => predictions.decisions(thresholds),
        ConfusionMode::Argmax => predictions
            .scores
            .iter()
            .map(|s| {
                let best = (0..s.len()).fold(0, |b, j| if s[j] > s[b] { j } else { b });
                vec![best]
            })
            .collect(),
    };
    let mut counts = vec![vec![0.0; n]; n];
    let mut observations = vec![0u64; n];
    for (gold, d) in predictions.gold.iter().zip(&decided) {
        for &i in gold {
            observations[i] += 1;
            for &j in d {
                counts[i][j] += 1.0;
            }
        }
    }
    ConfusionMatrix::from_counts(labels, counts, observations)
}

/// Category × category matrix: rows of each gold category are averaged with
/// their observation counts as weights, columns summed within categories.
pub fn pool_categories(m: &ConfusionMatrix, taxonomy: &EmotionTaxonomy) -> Result<ConfusionMatrix> {
    if m.len() != taxonomy.len() {
        return Err(Error::DimensionMismatch {
            expected: taxonomy.len(),
            actual: m.len(),
        });
    }
    let k = taxonomy.num_categories();
    let mut counts = vec![vec![0.0; k]; k];
    let mut observations = vec![0u64; k];
    for i in 0..m.len() {
        let a = taxonomy.category_of(i);
        let w = m.observations()[i];
        observations[a] += w;
        for (j, &v) in m.row(i).iter().enumerate() {
            counts[a][taxonomy.category_of(j)] += w as f64 * v;
        }
    }
    ConfusionMatrix::from_counts(taxonomy.categories().to_vec(), counts, observations)
}

/// One row per category: the column-wise maximum over its member emotions' rows.
pub fn category_activation_rows(m: &ConfusionMatrix, taxonomy: &EmotionTaxonomy) -> Result<Vec<Vec<f64>>> {
    if m.len() != taxonomy.len() {
        return Err(Error::DimensionMismatch {
            expected: taxonomy.len(),
            actual: m.len(),
        });
    }
    let mut rows = vec![vec![0.0f64; m.len()]; taxonomy.num_categories()];
    for i in 0..m.len() {
        let row = &mut rows[taxonomy.category_of(i)];
        for (r, &v) in row.iter_mut().zip(m.row(i)) {
            *r = r.max(v);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    #[test]
    fn perfect_predictions_give_identity() {
        let gold = vec![vec![0], vec![1], vec![2], vec![1]];
        let scores = gold
            .iter()
            .map(|g| (0..3).map(|j| if g.contains(&j) { 0.9 } else { 0.1 }).collect())
            .collect();
        let p = PredictionSet::new(3, names(4), scores, gold).unwrap();
        let m = build_confusion(&p, &ThresholdVector::uniform(3, 0.5), names(3), ConfusionMode::Decided).unwrap();
        assert_eq!(m, ConfusionMatrix::from_counts(names(3), ConfusionMatrix::identity(names(3)).rows(), vec![1, 2, 1]).unwrap());
    }

    #[test]
    fn rows_sum_to_one_and_zero_rows_flagged() {
        let p = PredictionSet::new(
            3,
            names(2),
            vec![vec![0.9, 0.8, 0.1], vec![0.2, 0.9, 0.6]],
            vec![vec![0], vec![0, 1]],
        )
        .unwrap();
        let m = build_confusion(&p, &ThresholdVector::uniform(3, 0.5), names(3), ConfusionMode::Decided).unwrap();
        for i in 0..2 {
            assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(m.zero_rows(), [2]);
        // Row 0: example 0 predicts {0,1}, example 1 predicts {1,2}.
        assert_eq!(m.row(0), [0.25, 0.5, 0.25]);
        let argmax = build_confusion(&p, &ThresholdVector::uniform(3, 0.5), names(3), ConfusionMode::Argmax).unwrap();
        assert_eq!(argmax.row(0), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn pooling_hand_case() {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1", "b2"])]).unwrap();
        let rows = vec![
            vec![0.5, 0.25, 0.25, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5],
        ];
        let m = ConfusionMatrix::from_counts(names(4), rows, vec![3, 1, 2, 2]).unwrap();
        let c = pool_categories(&m, &tax).unwrap();
        // A: (3·(0.75, 0.25) + 1·(0.5, 0.5)) / 4; B: (2·(1, 0) + 2·(0, 1)) / 4.
        assert_eq!(c.row(0), [0.6875, 0.3125]);
        assert_eq!(c.row(1), [0.5, 0.5]);
        assert_eq!(c.observations(), [4, 4]);
        let id = pool_categories(&ConfusionMatrix::identity(names(4)), &tax).unwrap();
        assert_eq!(id.rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn activation_rows_max_pool() {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1"])]).unwrap();
        let m = ConfusionMatrix::from_counts(
            names(3),
            vec![vec![0.6, 0.4, 0.0], vec![0.1, 0.2, 0.7], vec![0.0, 0.0, 1.0]],
            vec![1, 1, 1],
        )
        .unwrap();
        assert_eq!(category_activation_rows(&m, &tax).unwrap(), vec![vec![0.6, 0.4, 0.7], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn csv_layout() {
        let csv = ConfusionMatrix::identity(vec!["a".into(), "b,c".into()]).to_csv();
        assert_eq!(csv, "gold,a,\"b,c\"\na,1,0\n\"b,c\",0,1\n");
    }
}
