//! Reader annotations of writer-labelled snippets: ingestion, submission
//! screening, inter-reader agreement, writer/reader/model cross-prediction
//! and bootstrapped confusion differences between model and readers.

mod agreement;
mod cross;
mod delta;
mod quality;
mod records;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use agreement::{agreement_stats, AgreementStats, SnippetAgreement};
pub use cross::{cross_predict_f1, CrossF1Row, CrossF1Table, LabelSource, ReaderAggregation};
pub use delta::{confusion_delta_bootstrap, DeltaCell, DeltaConfig, DeltaMatrix};
pub use quality::{screen_submissions, submission_quality, QualityVerdict, SNIPPETS_PER_SUBMISSION};
pub use records::{load_annotations_csv, save_annotations_csv, AnnotationRecord};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::{PredictionSet, ThresholdVector};

/// Writer labels, reader judgements and model decisions aligned by example.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationStudy {
    pub ids: Vec<String>,
    pub writer: Vec<Vec<usize>>,
    /// One emotion per reader judgement.
    pub readers: Vec<Vec<usize>>,
    pub model: Vec<Vec<usize>>,
}

impl AnnotationStudy {
    /// Aligns the three sources on the annotated example ids; every id must
    /// be present in all of them.
    pub fn align(
        writer: &Corpus,
        annotations: &[AnnotationRecord],
        predictions: &PredictionSet,
        thresholds: &ThresholdVector,
    ) -> Result<Self> {
        let writer_map: HashMap<&str, &Vec<usize>> =
            writer.examples.iter().map(|e| (e.id.as_str(), &e.writer_labels)).collect();
        let decided = predictions.decisions(thresholds);
        let model_map: HashMap<&str, &Vec<usize>> =
            predictions.ids.iter().map(String::as_str).zip(decided.iter()).collect();
        let mut reader_map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for r in annotations {
            reader_map.entry(&r.example_id).or_default().push(r.emotion);
        }
        let all: BTreeSet<&str> = reader_map.keys().copied().chain(model_map.keys().copied()).collect();
        let mut missing = Vec::new();
        for id in &all {
            let mut from = Vec::new();
            if !writer_map.contains_key(id) {
                from.push("writer labels");
            }
            if !reader_map.contains_key(id) {
                from.push("reader annotations");
            }
            if !model_map.contains_key(id) {
                from.push("model predictions");
            }
            if !from.is_empty() {
                missing.push(format!("{id} (missing from {})", from.join(", ")));
            }
        }
        if !missing.is_empty() {
            return Err(Error::IdMismatch(missing));
        }
        let ids: Vec<String> = reader_map.keys().map(|s| s.to_string()).collect();
        Ok(Self {
            writer: ids.iter().map(|id| writer_map[id.as_str()].clone()).collect(),
            readers: ids.iter().map(|id| reader_map[id.as_str()].clone()).collect(),
            model: ids.iter().map(|id| model_map[id.as_str()].clone()).collect(),
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
