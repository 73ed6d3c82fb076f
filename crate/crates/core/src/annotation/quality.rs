use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnnotationRecord;
use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

/// Snippets per crowdsourced submission.
pub const SNIPPETS_PER_SUBMISSION: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityVerdict {
    pub accepted: bool,
    pub emotion_matches: usize,
    pub category_matches: usize,
}

/// Accepts a submission with at least one exact emotion match or at least
/// two category matches against the writer labels.
pub fn submission_quality(
    submission: &[AnnotationRecord],
    writer_labels: &HashMap<String, Vec<usize>>,
    taxonomy: &EmotionTaxonomy,
) -> Result<QualityVerdict> {
    let snippets: BTreeSet<&str> = submission.iter().map(|r| r.example_id.as_str()).collect();
    if snippets.len() != SNIPPETS_PER_SUBMISSION || submission.len() != SNIPPETS_PER_SUBMISSION {
        return Err(Error::InvalidArgument(format!(
            "a submission must annotate exactly {SNIPPETS_PER_SUBMISSION} snippets, got {} judgements over {} snippets",
            submission.len(),
            snippets.len()
        )));
    }
    let mut emotion_matches = 0;
    let mut category_matches = 0;
    for r in submission {
        let writer = writer_labels
            .get(&r.example_id)
            .ok_or_else(|| Error::IdMismatch(vec![r.example_id.clone()]))?;
        if writer.contains(&r.emotion) {
            emotion_matches += 1;
        }
        if writer.iter().any(|&w| taxonomy.category_of(w) == r.category) {
            category_matches += 1;
        }
    }
    Ok(QualityVerdict {
        accepted: emotion_matches >= 1 || category_matches >= 2,
        emotion_matches,
        category_matches,
    })
}

/// Verdicts for every submission, keyed by submission id.
pub fn screen_submissions(
    records: &[AnnotationRecord],
    writer_labels: &HashMap<String, Vec<usize>>,
    taxonomy: &EmotionTaxonomy,
) -> Result<BTreeMap<String, QualityVerdict>> {
    let mut groups: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.submission_id.clone()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(id, recs)| Ok((id, submission_quality(&recs, writer_labels, taxonomy)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (EmotionTaxonomy, HashMap<String, Vec<usize>>) {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1", "b2"]), ("C", vec!["c1"])]).unwrap();
        // Every snippet was written as a1 (category A).
        let writer = (0..10).map(|i| (format!("x{i}"), vec![0])).collect();
        (tax, writer)
    }

    fn submission(tax: &EmotionTaxonomy, emotions: [usize; 10]) -> Vec<AnnotationRecord> {
        emotions
            .iter()
            .enumerate()
            .map(|(i, &e)| AnnotationRecord::new(format!("x{i}"), "r", "s", e, tax).unwrap())
            .collect()
    }

    #[test]
    fn two_category_matches_accept() {
        let (tax, writer) = setup();
        let v = submission_quality(&submission(&tax, [1, 1, 2, 2, 2, 2, 4, 4, 4, 4]), &writer, &tax).unwrap();
        assert_eq!((v.emotion_matches, v.category_matches, v.accepted), (0, 2, true));
    }

    #[test]
    fn no_matches_reject() {
        let (tax, writer) = setup();
        let v = submission_quality(&submission(&tax, [2, 3, 2, 3, 4, 4, 2, 3, 4, 2]), &writer, &tax).unwrap();
        assert_eq!((v.emotion_matches, v.category_matches, v.accepted), (0, 0, false));
    }

    #[test]
    fn one_emotion_match_accept() {
        let (tax, writer) = setup();
        let v = submission_quality(&submission(&tax, [0, 3, 2, 3, 4, 4, 2, 3, 4, 2]), &writer, &tax).unwrap();
        assert_eq!((v.emotion_matches, v.category_matches, v.accepted), (1, 1, true));
    }

    #[test]
    fn wrong_count_rejected_as_error() {
        let (tax, writer) = setup();
        let mut s = submission(&tax, [0; 10]);
        s.pop();
        assert!(submission_quality(&s, &writer, &tax).is_err());
    }
}
