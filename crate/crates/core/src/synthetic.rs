//! Deterministic synthetic data: a Vent-like writer-labelled corpus with a
//! planted token→emotion signal, and the small trigger-token task used to
//! sanity-check the neural heads.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledExample};
use crate::error::{Error, Result};
use crate::features::{EmbeddingSequence, EmbeddingTable};
use crate::neural::SequenceExample;
use crate::taxonomy::{EmotionTaxonomy, VENT_CATEGORIES};

/// Letters-only token with a two-letter prefix that no English stopword uses.
fn token(prefix: &str, mut i: usize) -> String {
    let mut s = String::from(prefix);
    let mut digits = Vec::new();
    for _ in 0..3 {
        digits.push(b'a' + (i % 26) as u8);
        i /= 26;
    }
    s.extend(digits.iter().rev().map(|&b| b as char));
    s
}

/// 88 emotions spread as evenly as possible over the nine Vent categories.
pub fn vent_like_taxonomy(num_emotions: usize) -> Result<EmotionTaxonomy> {
    let k = VENT_CATEGORIES.len();
    if num_emotions < k {
        return Err(Error::InvalidArgument(format!("need at least {k} emotions")));
    }
    let groups = VENT_CATEGORIES.iter().enumerate().map(|(c, name)| {
        let size = num_emotions / k + usize::from(c < num_emotions % k);
        let members: Vec<String> = (0..size).map(|j| format!("{}{}", name.to_lowercase(), j + 1)).collect();
        (name.to_string(), members)
    });
    EmotionTaxonomy::from_groups(groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentLikeConfig {
    pub num_examples: usize,
    pub num_emotions: usize,
    /// Zipf exponent of emotion prevalence (by emotion index).
    pub zipf_exponent: f64,
    pub signal_tokens_per_emotion: usize,
    /// Probability that a token is drawn from the example's signal tokens.
    pub signal_probability: f64,
    pub noise_vocabulary: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// First timestamp; examples are spaced `step_seconds` apart.
    pub start_timestamp: i64,
    pub step_seconds: i64,
    pub seed: u64,
}

impl Default for VentLikeConfig {
    fn default() -> Self {
        Self {
            num_examples: 100_000,
            num_emotions: 88,
            zipf_exponent: 1.0,
            signal_tokens_per_emotion: 5,
            signal_probability: 0.3,
            noise_vocabulary: 2000,
            min_tokens: 3,
            max_tokens: 12,
            start_timestamp: 1_420_070_400,
            step_seconds: 600,
            seed: 0,
        }
    }
}

impl VentLikeConfig {
    /// Expected label prevalence, `p_k ∝ (k + 1)^{-s}`.
    pub fn prevalence(&self) -> Vec<f64> {
        let w: Vec<f64> = (0..self.num_emotions)
            .map(|k| ((k + 1) as f64).powf(-self.zipf_exponent))
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    pub fn signal_token(&self, emotion: usize, j: usize) -> String {
        token("zx", emotion * self.signal_tokens_per_emotion + j)
    }

    pub fn noise_token(&self, i: usize) -> String {
        token("zq", i)
    }

    /// Every token the generator can emit.
    pub fn vocabulary(&self) -> Vec<String> {
        let signal = (0..self.num_emotions)
            .flat_map(|e| (0..self.signal_tokens_per_emotion).map(move |j| (e, j)))
            .map(|(e, j)| self.signal_token(e, j));
        signal.chain((0..self.noise_vocabulary).map(|i| self.noise_token(i))).collect()
    }
}

/// One writer label per example, drawn Zipf-distributed; each token is one
/// of that emotion's signal tokens with probability `signal_probability`,
/// otherwise a uniformly drawn noise word.
pub fn vent_like_corpus(config: &VentLikeConfig) -> Result<Corpus> {
    if config.min_tokens == 0 || config.max_tokens < config.min_tokens || config.noise_vocabulary == 0 {
        return Err(Error::InvalidArgument("invalid synthetic corpus shape".into()));
    }
    if config.signal_tokens_per_emotion == 0 {
        return Err(Error::InvalidArgument("need at least one signal token per emotion".into()));
    }
    let taxonomy = vent_like_taxonomy(config.num_emotions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let emotions = WeightedIndex::new(config.prevalence()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let examples = (0..config.num_examples)
        .map(|i| {
            let e = emotions.sample(&mut rng);
            let len = rng.gen_range(config.min_tokens..=config.max_tokens);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(config.signal_probability) {
                        config.signal_token(e, rng.gen_range(0..config.signal_tokens_per_emotion))
                    } else {
                        config.noise_token(rng.gen_range(0..config.noise_vocabulary))
                    }
                })
                .collect();
            let ts = config.start_timestamp + i as i64 * config.step_seconds;
            LabeledExample::new(format!("syn{i}"), words.join(" "), vec![e], Some(ts))
        })
        .collect();
    Corpus::new(taxonomy, examples, format!("synthetic vent-like (seed {})", config.seed))
}

/// Static embedding table with i.i.d. uniform `[-1, 1)` vectors for `tokens`.
pub fn random_embedding_table(tokens: &[String], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = tokens
        .iter()
        .map(|t| (t.clone(), (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()))
        .collect();
    EmbeddingTable::new(dim, entries, Vec::new())
}

/// `n` sequences of 3–8 random filler embeddings, each containing the
/// trigger embedding of at least one label; the gold labels are exactly the
/// triggers present.
pub fn trigger_token_task(n: usize, num_labels: usize, dim: usize, seed: u64) -> Result<Vec<SequenceExample>> {
    if num_labels == 0 || dim == 0 {
        return Err(Error::InvalidArgument("trigger task needs labels and a positive dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vector = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let triggers: Vec<Vec<f64>> = (0..num_labels).map(|_| vector(&mut rng)).collect();
    let fillers: Vec<Vec<f64>> = (0..20).map(|_| vector(&mut rng)).collect();
    (0..n)
        .map(|_| {
            let mut labels: Vec<usize> = (0..num_labels).filter(|_| rng.gen_bool(0.4)).collect();
            if labels.is_empty() {
                labels.push(rng.gen_range(0..num_labels));
            }
            let mut rows: Vec<&Vec<f64>> = (0..rng.gen_range(3..=8)).map(|_| &fillers[rng.gen_range(0..fillers.len())]).collect();
            for &l in &labels {
                let at = rng.gen_range(0..=rows.len());
                rows.insert(at, &triggers[l]);
            }
            let flat: Vec<f64> = rows.into_iter().flatten().copied().collect();
            Ok(SequenceExample {
                sequence: EmbeddingSequence::from_rows(dim, flat)?,
                labels,
            })
        })
        .collect()
}
