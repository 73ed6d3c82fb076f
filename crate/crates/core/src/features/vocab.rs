use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// The standard 318-word English stop list.
pub fn english_stopwords() -> HashSet<String> {
    include_str!("../../data/stopwords_en.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Capped token -> index mapping over lowercased tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Index `i` is assigned to `tokens[i]`.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary token '{t}'")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Looks up an already lowercased token.
    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `{token: index}` JSON object.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), serde_json::Value::from(i)))
                .collect(),
        )
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidArgument("vocabulary JSON must be an object".into()))?;
        let mut tokens = vec![None; obj.len()];
        for (t, i) in obj {
            let i = i
                .as_u64()
                .filter(|&i| (i as usize) < tokens.len())
                .ok_or_else(|| Error::InvalidArgument(format!("bad index for token '{t}'")))?;
            if tokens[i as usize].replace(t.clone()).is_some() {
                return Err(Error::InvalidArgument(format!("index {i} assigned twice")));
            }
        }
        Self::from_tokens(tokens.into_iter().map(Option::unwrap).collect())
    }
}

/// Top-`cap` lowercased tokens by corpus frequency, stopwords excluded.
/// Ties go to the lexicographically smaller token; index = rank.
pub fn build_vocabulary(corpus: &Corpus, cap: usize, stopwords: &HashSet<String>) -> Result<Vocabulary> {
    if cap < 1 {
        return Err(Error::InvalidArgument("vocabulary cap must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for ex in &corpus.examples {
        for t in &ex.tokens {
            let t = t.to_lowercase();
            if !stopwords.contains(&t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cap);
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t).collect())
}

/// Counts of in-vocabulary tokens; unknown tokens are ignored.
pub fn bow_vector(tokens: &[String], vocab: &Vocabulary) -> SparseVector {
    let pairs: Vec<(u32, f64)> = tokens
        .iter()
        .filter_map(|t| vocab.get(&t.to_lowercase()))
        .map(|i| (i, 1.0))
        .collect();
    SparseVector::from_pairs(pairs, vocab.len()).expect("vocabulary indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledExample;
    use crate::taxonomy::EmotionTaxonomy;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        let ex = texts
            .iter()
            .enumerate()
            .map(|(i, t)| LabeledExample::new(i.to_string(), *t, vec![0], None))
            .collect();
        Corpus::new(EmotionTaxonomy::flat(["x"]).unwrap(), ex, "t").unwrap()
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stopword_list_size() {
        let s = english_stopwords();
        assert_eq!(s.len(), 318);
        assert!(s.contains("the"));
    }

    #[test]
    fn cap_larger_than_distinct_keeps_all() {
        let c = corpus(&["The cat sat", "the DOG sat"]);
        let v = build_vocabulary(&c, 100, &english_stopwords()).unwrap();
        assert_eq!(v.tokens(), ["sat", "cat", "dog"]);
        assert!(v.get("the").is_none());
    }

    #[test]
    fn empty_corpus_gives_empty_vocabulary() {
        let v = build_vocabulary(&corpus(&[]), 10, &HashSet::new()).unwrap();
        assert!(v.is_empty());
        assert!(build_vocabulary(&corpus(&[]), 0, &HashSet::new()).is_err());
    }

    #[test]
    fn bow_counts() {
        let v = Vocabulary::from_tokens(toks(&["a", "b"])).unwrap();
        let x = bow_vector(&toks(&["a", "b", "A"]), &v);
        assert_eq!(x.indices(), [0, 1]);
        assert_eq!(x.values(), [2.0, 1.0]);
        assert_eq!(bow_vector(&toks(&["zzz", "q"]), &v).nnz(), 0);
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::from_tokens(toks(&["x", "y", "z"])).unwrap();
        assert_eq!(Vocabulary::from_json(&v.to_json()).unwrap(), v);
    }

    proptest! {
        #[test]
        fn ties_match_sort_oracle(docs in proptest::collection::vec(proptest::collection::vec("[a-f]{1,2}", 0..8), 0..20), cap in 1usize..12) {
            let texts: Vec<String> = docs.iter().map(|d| d.join(" ")).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let c = corpus(&refs);
            let v = build_vocabulary(&c, cap, &HashSet::new()).unwrap();
            let mut counts: std::collections::BTreeMap<String, i64> = Default::default();
            for d in &docs { for w in d { *counts.entry(w.clone()).or_default() += 1; } }
            let mut oracle: Vec<(i64, String)> = counts.into_iter().map(|(w, c)| (-c, w)).collect();
            oracle.sort();
            let want: Vec<String> = oracle.into_iter().take(cap).map(|(_, w)| w).collect();
            prop_assert_eq!(v.tokens(), &want[..]);
            let again = build_vocabulary(&c, cap, &HashSet::new()).unwrap();
            prop_assert_eq!(again, v);
        }

        #[test]
        fn bow_matches_dense_count(doc in proptest::collection::vec("[a-h]", 0..30)) {
            let v = Vocabulary::from_tokens(toks(&["a", "c", "e", "g"])).unwrap();
            let x = bow_vector(&doc, &v);
            let mut dense = vec![0.0; 4];
            for w in &doc {
                if let Some(i) = ["a", "c", "e", "g"].iter().position(|t| t == w) { dense[i] += 1.0; }
            }
            prop_assert_eq!(x.to_dense(), dense);
            prop_assert!(x.values().iter().all(|&v| v != 0.0));
            prop_assert!(x.indices().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
