use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Corpus;
use crate::error::{Error, Result};

/// Draws `per_emotion` distinct examples for every emotion, skipping any
/// example whose case-folded tokens hit `excluded_terms`.
///
/// Emotions are visited in taxonomy order and an example is used at most
/// once. Fails listing every emotion that lacks eligible examples.
pub fn sample_annotation_set(
    corpus: &Corpus,
    per_emotion: usize,
    excluded_terms: &HashSet<String>,
    seed: u64,
) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<bool> = corpus
        .examples
        .iter()
        .map(|e| !e.tokens.iter().any(|t| excluded_terms.contains(&t.to_lowercase())))
        .collect();
    let mut used = vec![false; corpus.len()];
    let mut picked = Vec::new();
    let mut deficient = Vec::new();
    for emotion in 0..corpus.taxonomy.len() {
        let pool: Vec<usize> = (0..corpus.len())
            .filter(|&i| eligible[i] && !used[i] && corpus.examples[i].has_label(emotion))
            .collect();
        if pool.len() < per_emotion {
            deficient.push(format!(
                "{} ({} of {per_emotion})",
                corpus.taxonomy.emotion_name(emotion),
                pool.len()
            ));
            continue;
        }
        let mut chosen: Vec<usize> = sample(&mut rng, pool.len(), per_emotion)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        chosen.sort_unstable();
        for &i in &chosen {
            used[i] = true;
            picked.push(corpus.examples[i].clone());
        }
    }
    if !deficient.is_empty() {
        return Err(Error::InsufficientExamples(deficient));
    }
    Ok(corpus.with_examples(
        picked,
        format!("{} | annotation sample {per_emotion}/emotion seed {seed}", corpus.provenance),
    ))
}
