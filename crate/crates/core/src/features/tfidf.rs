use serde::{Deserialize, Serialize};

use super::{bow_vector, SparseVector, Vocabulary};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Smoothed inverse document frequencies, one per vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub weights: Vec<f64>,
    pub documents: usize,
}

/// `idf_i = ln((1 + D) / (1 + df_i)) + 1`.
pub fn tfidf_fit(corpus: &Corpus, vocab: &Vocabulary) -> IdfTable {
    let mut df = vec![0u64; vocab.len()];
    for ex in &corpus.examples {
        for i in bow_vector(&ex.tokens, vocab).indices() {
            df[*i as usize] += 1;
        }
    }
    let d = corpus.len() as f64;
    IdfTable {
        weights: df
            .into_iter()
            .map(|n| ((1.0 + d) / (1.0 + n as f64)).ln() + 1.0)
            .collect(),
        documents: corpus.len(),
    }
}

/// Raw counts times idf, L2-normalized (left empty when nothing matched).
pub fn tfidf_vector(tokens: &[String], vocab: &Vocabulary, idf: &IdfTable) -> Result<SparseVector> {
    if idf.weights.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            actual: idf.weights.len(),
        });
    }
    let counts = bow_vector(tokens, vocab);
    let weighted: Vec<f64> = counts
        .iter()
        .map(|(i, tf)| tf * idf.weights[i])
        .collect();
    let mut v = SparseVector::new(counts.indices().to_vec(), weighted, vocab.len())?;
    let norm = v.norm();
    if norm > 0.0 {
        v.scale(1.0 / norm);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledExample;
    use crate::taxonomy::EmotionTaxonomy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(docs: &[Vec<String>]) -> Corpus {
        let ex = docs
            .iter()
            .enumerate()
            .map(|(i, d)| LabeledExample::new(i.to_string(), d.join(" "), vec![0], None))
            .collect();
        Corpus::new(EmotionTaxonomy::flat(["x"]).unwrap(), ex, "t").unwrap()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn token_in_every_document_has_unit_idf() {
        let c = corpus(&[s(&["a", "b"]), s(&["a"]), s(&["a", "c"]), s(&["a"])]);
        let vocab = Vocabulary::from_tokens(s(&["a", "b"])).unwrap();
        let idf = tfidf_fit(&c, &vocab);
        assert_eq!(idf.weights[0], 1.0);
        assert!((idf.weights[1] - ((5.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn single_document_is_normalized_counts() {
        let doc = s(&["a", "a", "b"]);
        let c = corpus(&[doc.clone()]);
        let vocab = Vocabulary::from_tokens(s(&["a", "b"])).unwrap();
        let idf = tfidf_fit(&c, &vocab);
        assert_eq!(idf.weights, [1.0, 1.0]);
        let v = tfidf_vector(&doc, &vocab, &idf).unwrap();
        let n = 5f64.sqrt();
        assert_eq!(v.values(), [2.0 / n, 1.0 / n]);
    }

    #[test]
    fn mismatched_idf_rejected() {
        let vocab = Vocabulary::from_tokens(s(&["a", "b"])).unwrap();
        let idf = IdfTable { weights: vec![1.0], documents: 1 };
        assert!(matches!(
            tfidf_vector(&s(&["a"]), &vocab, &idf),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matches_reference_on_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
        let docs: Vec<Vec<String>> = (0..50)
            .map(|_| (0..rng.gen_range(1..10)).map(|_| words[rng.gen_range(0..12)].clone()).collect())
            .collect();
        let c = corpus(&docs);
        let vocab = Vocabulary::from_tokens(words[..8].to_vec()).unwrap();
        let idf = tfidf_fit(&c, &vocab);

        // Independent dense computation of the same formula.
        let d = docs.len() as f64;
        let ref_idf: Vec<f64> = vocab
            .tokens()
            .iter()
            .map(|t| {
                let df = docs.iter().filter(|doc| doc.contains(t)).count() as f64;
                ((1.0 + d) / (1.0 + df)).ln() + 1.0
            })
            .collect();
        for (a, b) in idf.weights.iter().zip(&ref_idf) {
            assert!((a - b).abs() < 1e-12);
        }
        for doc in &docs {
            let dense: Vec<f64> = vocab
                .tokens()
                .iter()
                .zip(&ref_idf)
                .map(|(t, w)| doc.iter().filter(|x| *x == t).count() as f64 * w)
                .collect();
            let norm = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v = tfidf_vector(doc, &vocab, &idf).unwrap().to_dense();
            for (a, b) in v.iter().zip(&dense) {
                let want = if norm > 0.0 { b / norm } else { 0.0 };
                assert!((a - want).abs() < 1e-12);
            }
            if norm > 0.0 {
                let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }
}
