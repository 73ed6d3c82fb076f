//! One-vs-rest statistical learners over sparse vectors, trained from
//! streaming mini-batches.

mod forest;
mod logistic;
mod naive_bayes;

use serde::{Deserialize, Serialize};

pub use forest::{rf_fit_incremental, ForestConfig, IncrementalForestModel, Tree, TreeNode};
pub use logistic::{lr_fit, LogisticConfig, LogisticRegressionModel, LrObjective};
pub use naive_bayes::{nb_fit, NaiveBayesModel};
pub(crate) use naive_bayes::sigmoid;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{SparseFeaturizer, SparseVector};

/// A vectorized example with its gold label set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    pub features: SparseVector,
    pub labels: Vec<usize>,
}

/// Vectorizes every example of `corpus`.
pub fn vectorize_corpus(corpus: &Corpus, featurizer: &SparseFeaturizer) -> Result<Vec<SparseExample>> {
    corpus
        .examples
        .iter()
        .map(|e| {
            Ok(SparseExample {
                features: featurizer.vectorize(&e.tokens)?,
                labels: e.writer_labels.clone(),
            })
        })
        .collect()
}

/// Consecutive mini-batches of at most `batch_size` examples.
pub fn mini_batches(examples: &[SparseExample], batch_size: usize) -> Result<Vec<&[SparseExample]>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    Ok(examples.chunks(batch_size).collect())
}

fn check_labels(batch: &[SparseExample], num_labels: usize, dim: usize) -> Result<()> {
    for ex in batch {
        if ex.features.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: ex.features.dim(),
            });
        }
        if let Some(&l) = ex.labels.iter().find(|&&l| l >= num_labels) {
            return Err(Error::InvalidArgument(format!("label {l} out of range for {num_labels} labels")));
        }
    }
    Ok(())
}

/// Any trained statistical learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticalModel {
    NaiveBayes(NaiveBayesModel),
    LogisticRegression(LogisticRegressionModel),
    RandomForest(IncrementalForestModel),
}

impl StatisticalModel {
    pub fn score(&self, x: &SparseVector) -> Result<Vec<f64>> {
        match self {
            Self::NaiveBayes(m) => m.score(x),
            Self::LogisticRegression(m) => m.score(x),
            Self::RandomForest(m) => m.score(x),
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Self::NaiveBayes(m) => m.num_labels(),
            Self::LogisticRegression(m) => m.num_labels(),
            Self::RandomForest(m) => m.num_labels(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::NaiveBayes(m) => m.dim(),
            Self::LogisticRegression(m) => m.dim(),
            Self::RandomForest(m) => m.dim(),
        }
    }
}
