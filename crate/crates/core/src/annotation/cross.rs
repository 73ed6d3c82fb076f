use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::AnnotationStudy;
use crate::error::Result;
use crate::eval::metrics_from_decisions;
use crate::taxonomy::EmotionTaxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Writer,
    Reader,
    Model,
}

/// How reader judgements form a prediction or label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReaderAggregation {
    /// Every judgement is its own instance.
    #[default]
    Unaggregated,
    /// One instance per snippet holding every most-frequent emotion.
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossF1Row {
    /// `emotion` or `category`.
    pub level: String,
    pub label_source: LabelSource,
    pub predictor: LabelSource,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossF1Table {
    pub aggregation: ReaderAggregation,
    pub rows: Vec<CrossF1Row>,
}

impl CrossF1Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,label_source,predictor,macro_f1,micro_f1,micro_precision,micro_recall,instances\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{},{},{},{},{}",
                r.level, r.label_source, r.predictor, r.macro_f1, r.micro_f1, r.micro_precision, r.micro_recall, r.instances
            );
        }
        out.to_lowercase()
    }
}

fn majority(judgements: &[usize]) -> Vec<usize> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &e in judgements {
        *counts.entry(e).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let mut out: Vec<usize> = counts.into_iter().filter(|&(_, c)| c == top).map(|(e, _)| e).collect();
    out.sort_unstable();
    out
}

/// Writer←reader, writer←model, reader←model and reader←writer F1 at the
/// emotion and category levels.
pub fn cross_predict_f1(study: &AnnotationStudy, taxonomy: &EmotionTaxonomy, aggregation: ReaderAggregation) -> Result<CrossF1Table> {
    let pairings = [
        (LabelSource::Writer, LabelSource::Reader),
        (LabelSource::Writer, LabelSource::Model),
        (LabelSource::Reader, LabelSource::Model),
        (LabelSource::Reader, LabelSource::Writer),
    ];
    let to_categories = |labels: &[usize]| {
        let mut c: Vec<usize> = labels.iter().map(|&l| taxonomy.category_of(l)).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut rows = Vec::new();
    for level in ["emotion", "category"] {
        let names = if level == "emotion" { taxonomy.emotions() } else { taxonomy.categories() };
        let map = |labels: &[usize]| if level == "emotion" { labels.to_vec() } else { to_categories(labels) };
        for (label_source, predictor) in pairings {
            let mut gold = Vec::new();
            let mut decided = Vec::new();
            for i in 0..study.len() {
                let set = |s: LabelSource| -> Vec<usize> {
                    match s {
                        LabelSource::Writer => study.writer[i].clone(),
                        LabelSource::Model => study.model[i].clone(),
                        LabelSource::Reader => majority(&study.readers[i]),
                    }
                };
                let involves_reader = label_source == LabelSource::Reader || predictor == LabelSource::Reader;
                if involves_reader && aggregation == ReaderAggregation::Unaggregated {
                    for &judgement in &study.readers[i] {
                        let resolve = |s: LabelSource| if s == LabelSource::Reader { vec![judgement] } else { set(s) };
                        gold.push(map(&resolve(label_source)));
                        decided.push(map(&resolve(predictor)));
                    }
                } else {
                    gold.push(map(&set(label_source)));
                    decided.push(map(&set(predictor)));
                }
            }
            let m = metrics_from_decisions(&decided, &gold, names)?;
            rows.push(CrossF1Row {
                level: level.to_string(),
                label_source,
                predictor,
                macro_f1: m.macro_f1,
                micro_f1: m.micro_f1,
                micro_precision: m.micro_precision,
                micro_recall: m.micro_recall,
                instances: gold.len(),
            });
        }
    }
    Ok(CrossF1Table { aggregation, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax() -> EmotionTaxonomy {
        EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1"])]).unwrap()
    }

    fn row<'a>(t: &'a CrossF1Table, level: &str, l: LabelSource, p: LabelSource) -> &'a CrossF1Row {
        t.rows.iter().find(|r| r.level == level && r.label_source == l && r.predictor == p).unwrap()
    }

    #[test]
    fn identical_sources_score_one() {
        let study = AnnotationStudy {
            ids: vec!["x".into(), "y".into()],
            writer: vec![vec![0], vec![2]],
            readers: vec![vec![0; 5], vec![2; 5]],
            model: vec![vec![0], vec![2]],
        };
        let t = cross_predict_f1(&study, &tax(), ReaderAggregation::Unaggregated).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert!(t.rows.iter().all(|r| r.micro_f1 == 1.0));
    }

    #[test]
    fn hand_fixture() {
        // x: writer a1, readers {a1, a2}, model {a1, b1}
        // y: writer a2, readers {b1, b1}, model {a2}
        // z: writer b1, readers {b1, a1}, model {a1}
        let study = AnnotationStudy {
            ids: vec!["x".into(), "y".into(), "z".into()],
            writer: vec![vec![0], vec![1], vec![2]],
            readers: vec![vec![0, 1], vec![2, 2], vec![2, 0]],
            model: vec![vec![0, 2], vec![1], vec![0]],
        };
        let t = cross_predict_f1(&study, &tax(), ReaderAggregation::Unaggregated).unwrap();
        // writer←model, emotions: tp = 2 (x:a1, y:a2), fp = 2 (x:b1, z:a1), fn = 1 (z:b1).
        let r = row(&t, "emotion", LabelSource::Writer, LabelSource::Model);
        assert_eq!((r.micro_precision, r.micro_recall), (0.5, 2.0 / 3.0));
        // writer←reader, six instances: tp = 2 (x:a1, z:b1), fp = fn = 4.
        let r = row(&t, "emotion", LabelSource::Writer, LabelSource::Reader);
        assert_eq!((r.instances, r.micro_precision, r.micro_recall), (6, 2.0 / 6.0, 2.0 / 6.0));
        // reader←model: x: (a1|{a1,b1}) tp1 fp1; (a2|{a1,b1}) fn1 fp2; y: (b1|{a2}) ×2 fn2 fp2;
        // z: (b1|{a1}) fn1 fp1, (a1|{a1}) tp1. tp 2, fp 6, fn 4.
        let r = row(&t, "emotion", LabelSource::Reader, LabelSource::Model);
        assert_eq!((r.micro_precision, r.micro_recall), (0.25, 2.0 / 6.0));
        // Categories, writer←model: x {A}|{A,B}, y {A}|{A}, z {B}|{A}: tp 2, fp 2, fn 1.
        let r = row(&t, "category", LabelSource::Writer, LabelSource::Model);
        assert_eq!((r.micro_precision, r.micro_recall), (0.5, 2.0 / 3.0));
    }

    #[test]
    fn swapping_roles_swaps_precision_and_recall() {
        let study = AnnotationStudy {
            ids: vec!["x".into(), "y".into()],
            writer: vec![vec![0, 1], vec![2]],
            readers: vec![vec![0, 2, 2], vec![1, 2, 0]],
            model: vec![vec![0], vec![2]],
        };
        let t = cross_predict_f1(&study, &tax(), ReaderAggregation::Unaggregated).unwrap();
        let a = row(&t, "emotion", LabelSource::Writer, LabelSource::Reader);
        let b = row(&t, "emotion", LabelSource::Reader, LabelSource::Writer);
        assert_eq!((a.micro_precision, a.micro_recall), (b.micro_recall, b.micro_precision));
    }

    #[test]
    fn majority_vote_mode() {
        assert_eq!(majority(&[2, 1, 2, 1, 0]), [1, 2]);
        let study = AnnotationStudy {
            ids: vec!["x".into()],
            writer: vec![vec![0]],
            readers: vec![vec![0, 0, 1]],
            model: vec![vec![0]],
        };
        let t = cross_predict_f1(&study, &tax(), ReaderAggregation::MajorityVote).unwrap();
        assert!(t.rows.iter().all(|r| r.instances == 1 && r.micro_f1 == 1.0));
    }
}
