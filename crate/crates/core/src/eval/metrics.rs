use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PredictionSet, ThresholdVector};
use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold positives.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl LabelMetrics {
    fn from_counts(name: String, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            name,
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: tp + fn_,
            tp,
            fp,
            fn_,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub examples: usize,
    pub per_label: Vec<LabelMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_category: Option<Vec<LabelMetrics>>,
}

impl MetricsReport {
    /// One aligned row in the `M-F1 m-F1 Pre Rec` layout.
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{name:<28} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            self.macro_f1, self.micro_f1, self.micro_precision, self.micro_recall
        )
    }

    pub fn table_header() -> String {
        format!("{:<28} {:>6} {:>6} {:>6} {:>6}", "Model", "M-F1", "m-F1", "Pre", "Rec")
    }

    /// Summary row plus the per-label block.
    pub fn to_text(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", Self::table_header());
        let _ = writeln!(out, "{}", self.table_row(name));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<20} {:>6} {:>6} {:>6} {:>7}", "Label", "Prec", "Rec", "F1", "Sup");
        let blocks = std::iter::once(&self.per_label).chain(self.per_category.as_ref());
        for block in blocks {
            for l in block {
                let _ = writeln!(
                    out,
                    "{:<20} {:>6.2} {:>6.2} {:>6.2} {:>7}",
                    l.name, l.precision, l.recall, l.f1, l.support
                );
            }
            let _ = writeln!(out);
        }
        out
    }
}

/// Metrics from already decided label sets.
///
/// Micro quantities pool TP/FP/FN over every (example, label) pair; macro-F1
/// is the unweighted mean of per-label F1 with 0/0 counted as 0.
pub fn metrics_from_decisions(decided: &[Vec<usize>], gold: &[Vec<usize>], names: &[String]) -> Result<MetricsReport> {
    if decided.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: decided.len(),
        });
    }
    if decided.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty prediction set".into()));
    }
    let n = names.len();
    let mut tp = vec![0usize; n];
    let mut fp = vec![0usize; n];
    let mut fn_ = vec![0usize; n];
    let mut in_gold = vec![false; n];
    for (d, g) in decided.iter().zip(gold) {
        for &l in g {
            in_gold[l] = true;
        }
        let mut in_decided = vec![false; n];
        for &l in d {
            in_decided[l] = true;
        }
        for l in 0..n {
            match (in_decided[l], in_gold[l]) {
                (true, true) => tp[l] += 1,
                (true, false) => fp[l] += 1,
                (false, true) => fn_[l] += 1,
                (false, false) => {}
            }
        }
        for &l in g {
            in_gold[l] = false;
        }
    }
    let per_label: Vec<LabelMetrics> = (0..n)
        .map(|l| LabelMetrics::from_counts(names[l].clone(), tp[l], fp[l], fn_[l]))
        .collect();
    let (stp, sfp, sfn) = (tp.iter().sum::<usize>(), fp.iter().sum::<usize>(), fn_.iter().sum::<usize>());
    let micro_precision = ratio(stp, stp + sfp);
    let micro_recall = ratio(stp, stp + sfn);
    Ok(MetricsReport {
        macro_f1: if n == 0 {
            0.0
        } else {
            per_label.iter().map(|l| l.f1).sum::<f64>() / n as f64
        },
        micro_f1: harmonic(micro_precision, micro_recall),
        micro_precision,
        micro_recall,
        examples: decided.len(),
        per_label,
        per_category: None,
    })
}

fn label_names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

pub fn compute_metrics(predictions: &PredictionSet, thresholds: &ThresholdVector) -> Result<MetricsReport> {
    if thresholds.len() != predictions.num_labels {
        return Err(Error::DimensionMismatch {
            expected: predictions.num_labels,
            actual: thresholds.len(),
        });
    }
    metrics_from_decisions(
        &predictions.decisions(thresholds),
        &predictions.gold,
        &label_names(predictions.num_labels),
    )
}

/// Emotion decisions pooled to categories (a category is predicted iff any
/// member emotion is), then binary metrics per category.
pub fn per_category_report(
    predictions: &PredictionSet,
    thresholds: &ThresholdVector,
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<LabelMetrics>> {
    let to_categories = |labels: &[usize]| {
        let mut c: Vec<usize> = labels.iter().map(|&l| taxonomy.category_of(l)).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let decided: Vec<Vec<usize>> = predictions
        .decisions(thresholds)
        .iter()
        .map(|d| to_categories(d))
        .collect();
    let gold: Vec<Vec<usize>> = predictions.gold.iter().map(|g| to_categories(g)).collect();
    Ok(metrics_from_decisions(&decided, &gold, taxonomy.categories())?.per_label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        label_names(n)
    }

    #[test]
    fn worked_hand_case() {
        let gold = vec![vec![0], vec![1, 2]];
        let decided = vec![vec![0, 1], vec![1]];
        let m = metrics_from_decisions(&decided, &gold, &names(3)).unwrap();
        assert_eq!(m.micro_precision, 2.0 / 3.0);
        assert_eq!(m.micro_recall, 2.0 / 3.0);
        assert!((m.micro_f1 - 2.0 / 3.0).abs() < 1e-15);
        let f1s: Vec<f64> = m.per_label.iter().map(|l| l.f1).collect();
        assert_eq!(f1s[0], 1.0);
        assert!((f1s[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1s[2], 0.0);
        assert!((m.macro_f1 - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let gold = vec![vec![0], vec![1, 2], vec![2]];
        let m = metrics_from_decisions(&gold, &gold, &names(3)).unwrap();
        assert_eq!((m.macro_f1, m.micro_f1, m.micro_precision, m.micro_recall), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_set_rejected() {
        assert!(metrics_from_decisions(&[], &[], &names(2)).is_err());
    }

    #[test]
    fn per_category_hand_case() {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1"]), ("C", vec!["c1"])]).unwrap();
        // Decisions at threshold 0.5: {a2}, {a1, b1}, {c1}; gold: {a1}, {b1}, {a2}.
        let scores = vec![
            vec![0.1, 0.9, 0.2, 0.3],
            vec![0.8, 0.1, 0.7, 0.2],
            vec![0.1, 0.2, 0.3, 0.6],
        ];
        let gold = vec![vec![0], vec![2], vec![1]];
        let p = PredictionSet::new(4, vec!["x".into(), "y".into(), "z".into()], scores, gold).unwrap();
        let cats = per_category_report(&p, &ThresholdVector::uniform(4, 0.5), &tax).unwrap();
        // A: tp 1 (x), fp 1 (y), fn 1 (z). B: tp 1. C: fp 1.
        assert_eq!((cats[0].tp, cats[0].fp, cats[0].fn_), (1, 1, 1));
        assert_eq!((cats[1].tp, cats[1].fp, cats[1].fn_), (1, 0, 0));
        assert_eq!((cats[2].tp, cats[2].fp, cats[2].fn_), (0, 1, 0));
        assert_eq!(cats[0].f1, 0.5);
        assert_eq!(cats[1].f1, 1.0);
        assert_eq!(cats[2].f1, 0.0);
        assert_eq!(cats[0].name, "A");
    }

    #[test]
    fn text_table_has_four_columns() {
        let gold = vec![vec![0]];
        let m = metrics_from_decisions(&gold, &gold, &names(1)).unwrap();
        let t = m.to_text("BoW N. Bayes");
        assert!(t.contains("M-F1") && t.contains("m-F1") && t.contains("Pre") && t.contains("Rec"));
    }

    fn brute_force(scores: &[Vec<f64>], gold: &[Vec<usize>], t: &[f64], n: usize) -> (f64, f64, f64, f64) {
        let (mut tp, mut fp, mut fn_) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (s, g) in scores.iter().zip(gold) {
            let mut d: Vec<bool> = (0..n).map(|l| s[l] >= t[l]).collect();
            if !d.iter().any(|&b| b) {
                let arg = (0..n).fold(0, |b, l| if s[l] > s[b] { l } else { b });
                d[arg] = true;
            }
            for l in 0..n {
                let y = g.contains(&l);
                match (d[l], y) {
                    (true, true) => tp[l] += 1.0,
                    (true, false) => fp[l] += 1.0,
                    (false, true) => fn_[l] += 1.0,
                    _ => {}
                }
            }
        }
        let f = |tp: f64, fp: f64, fn_: f64| {
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            (p, r, if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
        };
        let macro_f1 = (0..n).map(|l| f(tp[l], fp[l], fn_[l]).2).sum::<f64>() / n as f64;
        let (p, r, f1) = f(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
        (macro_f1, f1, p, r)
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_brute_force(
            (n, rows) in (1usize..=10).prop_flat_map(|n| (
                Just(n),
                prop::collection::vec(
                    (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(any::<bool>(), n)),
                    1..=50,
                ),
            )),
            t in 0.05f64..0.95,
        ) {
            let scores: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
            let gold: Vec<Vec<usize>> = rows.iter().map(|r| (0..n).filter(|&l| r.1[l]).collect()).collect();
            let ids = (0..rows.len()).map(|i| i.to_string()).collect();
            let p = PredictionSet::new(n, ids, scores.clone(), gold.clone()).unwrap();
            let m = compute_metrics(&p, &ThresholdVector::uniform(n, t)).unwrap();
            let (ma, mi, pr, re) = brute_force(&scores, &gold, &vec![t; n], n);
            prop_assert!((m.macro_f1 - ma).abs() <= 1e-12);
            prop_assert!((m.micro_f1 - mi).abs() <= 1e-12);
            prop_assert!((m.micro_precision - pr).abs() <= 1e-12);
            prop_assert!((m.micro_recall - re).abs() <= 1e-12);
        }
    }
}
