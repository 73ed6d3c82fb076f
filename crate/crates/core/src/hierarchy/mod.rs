//! Confusion ("activation") matrices between emotions and the dendrograms
//! obtained by agglomerative clustering of their rows.

mod cluster;
mod confusion;

pub use cluster::{agglomerate, Dendrogram, Linkage, Merge};
pub use confusion::{build_confusion, category_activation_rows, pool_categories, ConfusionMatrix, ConfusionMode};
pub(crate) use confusion::csv_field;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

/// An emotion dendrogram plus the rows left out of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionHierarchy {
    pub dendrogram: Dendrogram,
    /// Emotions with an all-zero confusion row, which have no defined distance.
    pub excluded: Vec<String>,
}

/// Clusters the observed rows of `m`.
pub fn emotion_dendrogram(m: &ConfusionMatrix, linkage: Linkage) -> Result<EmotionHierarchy> {
    let zero = m.zero_rows();
    let keep: Vec<usize> = (0..m.len()).filter(|i| !zero.contains(i)).collect();
    if keep.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} emotion(s) have observations; clustering needs two",
            keep.len()
        )));
    }
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| m.row(i).to_vec()).collect();
    let labels = keep.iter().map(|&i| m.labels()[i].clone()).collect();
    Ok(EmotionHierarchy {
        dendrogram: agglomerate(&rows, labels, linkage)?,
        excluded: zero.iter().map(|&i| m.labels()[i].clone()).collect(),
    })
}

/// Dendrogram over categories from max-pooled activation rows.
pub fn category_activation_dendrogram(m: &ConfusionMatrix, taxonomy: &EmotionTaxonomy, linkage: Linkage) -> Result<Dendrogram> {
    let rows = category_activation_rows(m, taxonomy)?;
    agglomerate(&rows, taxonomy.categories().to_vec(), linkage)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_two_categories() {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1"])]).unwrap();
        let m = ConfusionMatrix::identity(tax.emotions().to_vec());
        let d = category_activation_dendrogram(&m, &tax, Linkage::Average).unwrap();
        assert_eq!(d.num_leaves(), 2);
        assert_eq!(d.merges.len(), 1);
        // Rows (1,1,0) and (0,0,1).
        assert!((d.merges[0].height - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_excluded() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m = ConfusionMatrix::from_counts(
            names,
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.5]],
            vec![1, 0, 2],
        )
        .unwrap();
        let h = emotion_dendrogram(&m, Linkage::Average).unwrap();
        assert_eq!(h.excluded, ["b"]);
        assert_eq!(h.dendrogram.leaves, ["a", "c"]);
    }
}
