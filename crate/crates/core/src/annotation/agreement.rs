use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::AnnotationRecord;
use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetAgreement {
    pub example_id: String,
    /// Readers choosing the most frequent emotion.
    pub emotion_overlap: usize,
    /// Readers choosing the most frequent category.
    pub category_overlap: usize,
}

/// Modal-label overlap statistics; standard deviations are population values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub readers_per_snippet: usize,
    pub snippets: Vec<SnippetAgreement>,
    pub emotion_mean: f64,
    pub emotion_std: f64,
    pub category_mean: f64,
    pub category_std: f64,
}

fn modal_count<T: std::hash::Hash + Eq>(items: impl Iterator<Item = T>) -> usize {
    let mut counts: HashMap<T, usize> = HashMap::new();
    for x in items {
        *counts.entry(x).or_default() += 1;
    }
    counts.into_values().max().unwrap_or(0)
}

pub fn agreement_stats(records: &[AnnotationRecord]) -> Result<AgreementStats> {
    let mut by_snippet: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_snippet.entry(&r.example_id).or_default().push(r);
    }
    let Some(first) = by_snippet.values().next() else {
        return Err(Error::InvalidArgument("no annotations".into()));
    };
    let readers = first.len();
    if let Some((id, rs)) = by_snippet.iter().find(|(_, rs)| rs.len() != readers) {
        return Err(Error::InvalidArgument(format!(
            "snippet {id} has {} readers, expected {readers} like the others",
            rs.len()
        )));
    }
    let snippets: Vec<SnippetAgreement> = by_snippet
        .iter()
        .map(|(id, rs)| SnippetAgreement {
            example_id: id.to_string(),
            emotion_overlap: modal_count(rs.iter().map(|r| r.emotion)),
            category_overlap: modal_count(rs.iter().map(|r| r.category)),
        })
        .collect();
    let e: Vec<f64> = snippets.iter().map(|s| s.emotion_overlap as f64).collect();
    let c: Vec<f64> = snippets.iter().map(|s| s.category_overlap as f64).collect();
    Ok(AgreementStats {
        readers_per_snippet: readers,
        emotion_mean: mean(&e),
        emotion_std: std_dev(&e),
        category_mean: mean(&c),
        category_std: std_dev(&c),
        snippets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::EmotionTaxonomy;

    fn tax() -> EmotionTaxonomy {
        EmotionTaxonomy::from_groups([("A", vec!["a", "b"]), ("B", vec!["c", "d"])]).unwrap()
    }

    fn snippet(id: &str, emotions: &[usize], t: &EmotionTaxonomy) -> Vec<AnnotationRecord> {
        emotions
            .iter()
            .enumerate()
            .map(|(i, &e)| AnnotationRecord::new(id, format!("r{i}"), "s", e, t).unwrap())
            .collect()
    }

    #[test]
    fn unanimous_and_mixed() {
        let t = tax();
        let mut recs = snippet("x", &[1, 1, 1, 1, 1], &t);
        recs.extend(snippet("y", &[0, 0, 1, 2, 3], &t));
        let s = agreement_stats(&recs).unwrap();
        assert_eq!(s.snippets[0].emotion_overlap, 5);
        assert_eq!(s.snippets[0].category_overlap, 5);
        assert_eq!(s.snippets[1].emotion_overlap, 2);
        assert_eq!(s.snippets[1].category_overlap, 3);
        assert_eq!(s.emotion_mean, 3.5);
        assert_eq!(s.emotion_std, 1.5);
    }

    #[test]
    fn reader_relabeling_invariant() {
        let t = tax();
        let a = snippet("x", &[0, 2, 2, 3, 1], &t);
        let mut b = a.clone();
        for r in &mut b {
            r.reader_id = format!("other-{}", r.reader_id);
        }
        b.reverse();
        assert_eq!(agreement_stats(&a).unwrap(), agreement_stats(&b).unwrap());
    }

    #[test]
    fn unequal_reader_counts_rejected() {
        let t = tax();
        let mut recs = snippet("x", &[0, 0, 0], &t);
        recs.extend(snippet("y", &[0, 0], &t));
        assert!(agreement_stats(&recs).is_err());
    }
}
