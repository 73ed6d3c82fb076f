//! Feature spaces: capped-vocabulary sparse vectors (bag-of-words, TF-IDF)
//! and fixed-length embedding sequences.

mod embedding;
mod sparse;
mod tensor_file;
mod tfidf;
mod vocab;

pub use embedding::{embed_sequence, fnv1a32, EmbeddingSequence, EmbeddingTable, OovPolicy};
pub use sparse::SparseVector;
pub use tensor_file::{read_tensor_file, write_tensor_file, TensorRecord, TENSOR_MAGIC, TENSOR_VERSION};
pub use tfidf::{tfidf_fit, tfidf_vector, IdfTable};
pub use vocab::{bow_vector, build_vocabulary, english_stopwords, Vocabulary};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// A fitted sparse representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparseFeaturizer {
    Bow { vocab: Vocabulary },
    Tfidf { vocab: Vocabulary, idf: IdfTable },
}

impl SparseFeaturizer {
    pub fn vectorize(&self, tokens: &[String]) -> Result<SparseVector> {
        match self {
            SparseFeaturizer::Bow { vocab } => Ok(bow_vector(tokens, vocab)),
            SparseFeaturizer::Tfidf { vocab, idf } => tfidf_vector(tokens, vocab, idf),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SparseFeaturizer::Bow { vocab } | SparseFeaturizer::Tfidf { vocab, .. } => vocab.len(),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        match self {
            SparseFeaturizer::Bow { vocab } | SparseFeaturizer::Tfidf { vocab, .. } => vocab,
        }
    }
}
