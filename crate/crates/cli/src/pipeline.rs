//! Corpus-to-artifact training and corpus scoring.

use emobench::artifact::{data_fingerprint, FeatureSpace, Learner, ModelArtifact, TrainingMetadata};
use emobench::corpus::Corpus;
use emobench::eval::{default_grid, tune_thresholds, PredictionSet, ThresholdVector};
use emobench::features::{
    build_vocabulary, embed_sequence, english_stopwords, tfidf_fit, EmbeddingTable, SparseFeaturizer,
};
use emobench::learners::{lr_fit, mini_batches, nb_fit, rf_fit_incremental, vectorize_corpus, StatisticalModel};
use emobench::neural::{self, Architecture, SequenceExample, TrainingLog};
use emobench::Error;

use crate::config::{LearnerConfig, RepresentationConfig, RunConfig};
use crate::error::{require_file, CliResult};

pub struct TrainedRun {
    pub artifact: ModelArtifact,
    pub log: Option<TrainingLog>,
}

fn sparse_featurizer(repr: &RepresentationConfig, train: &Corpus) -> CliResult<SparseFeaturizer> {
    let stopwords = english_stopwords();
    Ok(match *repr {
        RepresentationConfig::Bow { vocabulary_size } => SparseFeaturizer::Bow {
            vocab: build_vocabulary(train, vocabulary_size, &stopwords)?,
        },
        RepresentationConfig::Tfidf { vocabulary_size } => {
            let vocab = build_vocabulary(train, vocabulary_size, &stopwords)?;
            let idf = tfidf_fit(train, &vocab);
            SparseFeaturizer::Tfidf { vocab, idf }
        }
        RepresentationConfig::Embedding { .. } => unreachable!("checked by RunConfig::finalize"),
    })
}

/// Examples with no tokens have no sequence to learn from and are skipped.
fn sequences(corpus: &Corpus, table: &EmbeddingTable, max_length: usize) -> CliResult<Vec<SequenceExample>> {
    corpus
        .examples
        .iter()
        .filter(|ex| !ex.tokens.is_empty())
        .map(|ex| {
            Ok(SequenceExample {
                sequence: embed_sequence(&ex.tokens, table, max_length)?,
                labels: ex.writer_labels.clone(),
            })
        })
        .collect()
}

fn metadata(cfg: &RunConfig, train: &Corpus) -> TrainingMetadata {
    let created_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default();
    TrainingMetadata {
        seed: cfg.seed,
        hyperparameters: cfg.hyperparameters(),
        data_fingerprint: data_fingerprint(train),
        created_at,
    }
}

/// Fits the configured representation and learner on `train` and, when
/// enabled, tunes thresholds on `validation`.
pub fn train_run(cfg: &RunConfig, train: &Corpus, validation: &Corpus) -> CliResult<TrainedRun> {
    let n = train.taxonomy.len();
    let (features, learner, log) = match &cfg.representation {
        RepresentationConfig::Embedding { model, max_length, .. } => {
            require_file(model)?;
            let source = model
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| model.display().to_string());
            let table = EmbeddingTable::load(model)?;
            let train_seqs = sequences(train, &table, *max_length)?;
            let val_seqs = sequences(validation, &table, *max_length)?;
            let architecture = match cfg.learner {
                LearnerConfig::DnnPool {
                    hidden_size,
                    num_layers,
                    activation,
                    pooling_function,
                    ..
                } => Architecture::PooledDnn {
                    input_dim: table.dim(),
                    hidden_size,
                    num_layers,
                    activation,
                    pooling: pooling_function,
                    num_labels: n,
                },
                LearnerConfig::BiLstm {
                    hidden_size,
                    num_layers,
                    bidirectional,
                    pooling_function,
                    ..
                } => Architecture::BiLstm {
                    input_dim: table.dim(),
                    hidden_size,
                    num_layers,
                    bidirectional,
                    pooling: pooling_function,
                    num_labels: n,
                },
                _ => unreachable!("checked by RunConfig::finalize"),
            };
            let tc = cfg.learner.neural_training(cfg.batch_size).expect("neural learner");
            let (model, log) = neural::train(architecture, &train_seqs, &val_seqs, &tc, cfg.seed)?;
            let features = FeatureSpace::Embedding {
                source,
                max_length: *max_length,
                table,
            };
            (features, Learner::Neural { model }, Some(log))
        }
        repr => {
            let featurizer = sparse_featurizer(repr, train)?;
            let dim = featurizer.dim();
            let examples = vectorize_corpus(train, &featurizer)?;
            let batches = mini_batches(&examples, cfg.batch_size)?;
            let model = match &cfg.learner {
                LearnerConfig::NaiveBayes { smoothing_factor } => {
                    StatisticalModel::NaiveBayes(nb_fit(batches, n, dim, *smoothing_factor)?)
                }
                LearnerConfig::LogisticRegression { .. } => {
                    let lc = cfg.learner.logistic().expect("logistic learner");
                    StatisticalModel::LogisticRegression(lr_fit(batches, n, dim, &lc, cfg.seed)?)
                }
                LearnerConfig::RandomForest { .. } => {
                    let fc = cfg.learner.forest().expect("forest learner");
                    StatisticalModel::RandomForest(rf_fit_incremental(batches, n, dim, &fc, cfg.seed)?)
                }
                _ => unreachable!("checked by RunConfig::finalize"),
            };
            (FeatureSpace::Sparse { featurizer }, Learner::Statistical { model }, None)
        }
    };
    let mut artifact = ModelArtifact::new(
        train.taxonomy.clone(),
        features,
        learner,
        ThresholdVector::uniform(n, 0.5),
        metadata(cfg, train),
    )?;
    if cfg.tune_thresholds && !validation.is_empty() {
        let preds = score_corpus(&artifact, validation)?;
        artifact.thresholds = tune_thresholds(&preds, &default_grid())?;
    }
    Ok(TrainedRun { artifact, log })
}

/// Scores every example. An example without tokens gets all-zero scores
/// under an embedding model, which cannot score an empty sequence.
pub fn score_corpus(artifact: &ModelArtifact, corpus: &Corpus) -> CliResult<PredictionSet> {
    let n = artifact.taxonomy.len();
    let scores = corpus
        .examples
        .iter()
        .map(|ex| match artifact.score_tokens(&ex.tokens) {
            Err(Error::EmptySequence) => Ok(vec![0.0; n]),
            other => other,
        })
        .collect::<emobench::Result<Vec<_>>>()?;
    Ok(PredictionSet::from_corpus(corpus, scores)?)
}
