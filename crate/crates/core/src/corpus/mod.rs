//! Labelled corpora: loading, filtering, splitting and sampling.

mod filter;
mod io;
mod sample;
mod split;
pub mod text;

pub use filter::{
    filter_by_length, filter_stable_emotions, flag_obscene, month_key, obscenity_by_category,
    stability_report, CategoryRate, ObscenityReport, PairwiseTest, StabilityReport, StableOrder,
    DEFAULT_KL_SMOOTHING, STABILITY_CEILING,
};
pub use io::{load_goemotions_tsv, load_jsonl, load_vent_jsonl, load_word_list, save_jsonl};
pub use sample::sample_annotation_set;
pub use split::{split_random, split_temporal, Fractions};
pub use text::{normalize_text, tokenize};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub raw_text: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Sorted, deduplicated emotion indices.
    pub writer_labels: Vec<usize>,
    /// UTC seconds.
    pub timestamp: Option<i64>,
}

impl LabeledExample {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        mut labels: Vec<usize>,
        timestamp: Option<i64>,
    ) -> Self {
        let raw_text = raw_text.into();
        let text = normalize_text(&raw_text);
        let tokens = tokenize(&text);
        labels.sort_unstable();
        labels.dedup();
        Self {
            id: id.into(),
            raw_text,
            text,
            tokens,
            writer_labels: labels,
            timestamp,
        }
    }

    pub fn has_label(&self, emotion: usize) -> bool {
        self.writer_labels.binary_search(&emotion).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub taxonomy: EmotionTaxonomy,
    pub examples: Vec<LabeledExample>,
    pub provenance: String,
}

impl Corpus {
    /// Validates every example against the taxonomy.
    pub fn new(
        taxonomy: EmotionTaxonomy,
        examples: Vec<LabeledExample>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = taxonomy.len();
        for ex in &examples {
            if ex.writer_labels.is_empty() {
                return Err(Error::InvalidArgument(format!("example '{}' has no labels", ex.id)));
            }
            if let Some(&bad) = ex.writer_labels.iter().find(|&&l| l >= n) {
                return Err(Error::InvalidArgument(format!(
                    "example '{}' has label {bad} outside a taxonomy of {n}",
                    ex.id
                )));
            }
        }
        Ok(Self {
            taxonomy,
            examples,
            provenance: provenance.into(),
        })
    }

    /// Same taxonomy, different examples; used by filters and splits.
    pub fn with_examples(&self, examples: Vec<LabeledExample>, provenance: impl Into<String>) -> Self {
        Self {
            taxonomy: self.taxonomy.clone(),
            examples,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Per-emotion count of examples carrying the label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.taxonomy.len()];
        for ex in &self.examples {
            for &l in &ex.writer_labels {
                counts[l] += 1;
            }
        }
        counts
    }

    /// Gold label sets in example order.
    pub fn gold(&self) -> Vec<Vec<usize>> {
        self.examples.iter().map(|e| e.writer_labels.clone()).collect()
    }
}
