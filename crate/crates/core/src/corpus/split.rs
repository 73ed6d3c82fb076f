use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, LabeledExample};
use crate::error::{Error, Result};

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Fractions {
    pub const EIGHTY_TEN_TEN: Fractions = Fractions {
        train: 0.8,
        val: 0.1,
        test: 0.1,
    };

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&f| !(f > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    fn sizes(&self, n: usize) -> (usize, usize) {
        let train = ((n as f64) * self.train).round() as usize;
        let val = (((n as f64) * self.val).round() as usize).min(n - train.min(n));
        (train.min(n), val)
    }
}

fn partition(corpus: &Corpus, ordered: Vec<LabeledExample>, fr: Fractions, how: &str) -> (Corpus, Corpus, Corpus) {
    let (n_train, n_val) = fr.sizes(ordered.len());
    let mut rest = ordered;
    let test = rest.split_off(n_train + n_val);
    let val = rest.split_off(n_train);
    let p = &corpus.provenance;
    (
        corpus.with_examples(rest, format!("{p} | {how} train")),
        corpus.with_examples(val, format!("{p} | {how} val")),
        corpus.with_examples(test, format!("{p} | {how} test")),
    )
}

/// Sorts by timestamp (stable, so ties keep input order) and cuts the
/// sequence into contiguous train/validation/test blocks.
pub fn split_temporal(corpus: &Corpus, fractions: Fractions) -> Result<(Corpus, Corpus, Corpus)> {
    fractions.validate()?;
    if let Some(ex) = corpus.examples.iter().find(|e| e.timestamp.is_none()) {
        return Err(Error::MissingTimestamp(ex.id.clone()));
    }
    let mut ordered = corpus.examples.clone();
    ordered.sort_by_key(|e| e.timestamp);
    Ok(partition(corpus, ordered, fractions, "temporal"))
}

/// Seeded uniform permutation followed by the same partition.
pub fn split_random(corpus: &Corpus, fractions: Fractions, seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    fractions.validate()?;
    let mut ordered = corpus.examples.clone();
    ordered.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(partition(corpus, ordered, fractions, "random"))
}
