use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ThresholdVector;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

/// Scores and gold label sets for a batch of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub num_labels: usize,
    pub ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub gold: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DumpRow {
    id: String,
    scores: Vec<f64>,
    gold: Vec<usize>,
}

impl PredictionSet {
    pub fn new(num_labels: usize, ids: Vec<String>, scores: Vec<Vec<f64>>, gold: Vec<Vec<usize>>) -> Result<Self> {
        if ids.len() != scores.len() || scores.len() != gold.len() {
            return Err(Error::InvalidArgument(format!(
                "prediction set columns differ in length: {} ids, {} scores, {} gold",
                ids.len(),
                scores.len(),
                gold.len()
            )));
        }
        for (s, g) in scores.iter().zip(&gold) {
            if s.len() != num_labels {
                return Err(Error::DimensionMismatch {
                    expected: num_labels,
                    actual: s.len(),
                });
            }
            if let Some(&bad) = g.iter().find(|&&l| l >= num_labels) {
                return Err(Error::InvalidArgument(format!("gold label {bad} out of range")));
            }
        }
        Ok(Self {
            num_labels,
            ids,
            scores,
            gold,
        })
    }

    /// Pairs scores with the gold labels and ids of `corpus`.
    pub fn from_corpus(corpus: &Corpus, scores: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            corpus.taxonomy.len(),
            corpus.examples.iter().map(|e| e.id.clone()).collect(),
            scores,
            corpus.gold(),
        )
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn decisions(&self, thresholds: &ThresholdVector) -> Vec<Vec<usize>> {
        self.scores.iter().map(|s| decide(s, thresholds)).collect()
    }

    /// JSON lines `{id, scores, gold}`.
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for ((id, s), g) in self.ids.iter().zip(&self.scores).zip(&self.gold) {
            serde_json::to_writer(
                &mut out,
                &DumpRow {
                    id: id.clone(),
                    scores: s.clone(),
                    gold: g.clone(),
                },
            )?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (mut ids, mut scores, mut gold) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: DumpRow = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
            ids.push(row.id);
            scores.push(row.scores);
            gold.push(row.gold);
        }
        let n = scores.first().map_or(0, Vec::len);
        Self::new(n, ids, scores, gold)
    }
}

/// Labels scoring at or above their threshold; the argmax label when none
/// does, so at least one label is always emitted.
pub fn decide(scores: &[f64], thresholds: &ThresholdVector) -> Vec<usize> {
    let picked: Vec<usize> = scores
        .iter()
        .zip(thresholds.values())
        .enumerate()
        .filter(|(_, (s, t))| s >= t)
        .map(|(i, _)| i)
        .collect();
    if !picked.is_empty() || scores.is_empty() {
        return picked;
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    vec![best]
}

/// I.i.d. uniform scores in `[0, 1)`.
pub fn random_scores(n_examples: usize, num_labels: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_examples)
        .map(|_| (0..num_labels).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

/// The random baseline evaluated on `corpus`.
pub fn random_baseline(corpus: &Corpus, seed: u64) -> Result<PredictionSet> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("random baseline needs at least one example".into()));
    }
    PredictionSet::from_corpus(corpus, random_scores(corpus.len(), corpus.taxonomy.len(), seed))
}

/// Per-category maximum over member emotion scores.
pub fn category_pool(scores: &[f64], taxonomy: &EmotionTaxonomy) -> Vec<f64> {
    let mut out = vec![0.0f64; taxonomy.num_categories()];
    for (e, &s) in scores.iter().enumerate() {
        let c = taxonomy.category_of(e);
        out[c] = out[c].max(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn decide_all_above() {
        let t = ThresholdVector::uniform(4, 0.5);
        assert_eq!(decide(&[0.9; 4], &t), [0, 1, 2, 3]);
    }

    #[test]
    fn decide_falls_back_to_argmax() {
        let t = ThresholdVector::uniform(3, 0.5);
        assert_eq!(decide(&[0.1, 0.4, 0.2], &t), [1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn decide_matches_brute_force(scores in proptest::collection::vec(0.0f64..1.0, 1..12), seed in 0u64..1000) {
            let n = scores.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = ThresholdVector::new((0..n).map(|_| rng.gen_range(0.01..0.99)).collect()).unwrap();
            let got = decide(&scores, &t);
            let mut want = Vec::new();
            for i in 0..n {
                if scores[i] >= t.values()[i] { want.push(i); }
            }
            if want.is_empty() {
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                want.push(scores.iter().position(|&s| s == m).unwrap());
            }
            prop_assert_eq!(got, want);
        }

        #[test]
        fn category_pool_is_member_max(scores in proptest::collection::vec(0.0f64..1.0, 6)) {
            let tax = EmotionTaxonomy::from_groups([("a", vec!["1", "2", "3"]), ("b", vec!["4"]), ("c", vec!["5", "6"])]).unwrap();
            let pooled = category_pool(&scores, &tax);
            prop_assert_eq!(pooled[0], scores[0].max(scores[1]).max(scores[2]));
            prop_assert_eq!(pooled[1], scores[3]);
            prop_assert_eq!(pooled[2], scores[4].max(scores[5]));
        }
    }

    #[test]
    fn category_pool_cases() {
        let tax = EmotionTaxonomy::from_groups([("a", vec!["1", "2"]), ("b", vec!["3"])]).unwrap();
        assert_eq!(category_pool(&[0.0, 0.7, 0.0], &tax), [0.7, 0.0]);
        assert_eq!(category_pool(&[0.2, 0.2, 0.0], &tax), [0.2, 0.0]);
    }

    #[test]
    fn random_scores_are_seeded() {
        assert_eq!(random_scores(5, 3, 1), random_scores(5, 3, 1));
        assert_ne!(random_scores(5, 3, 1), random_scores(5, 3, 2));
    }

    #[test]
    fn jsonl_round_trip() {
        let p = PredictionSet::new(2, vec!["a".into()], vec![vec![0.25, 1.0 / 3.0]], vec![vec![1]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        p.save_jsonl(&path).unwrap();
        assert_eq!(PredictionSet::load_jsonl(&path).unwrap(), p);
    }
}
