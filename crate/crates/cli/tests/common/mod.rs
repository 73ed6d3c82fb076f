#![allow(dead_code)]

use std::path::Path;

use emobench::artifact::ModelArtifact;
use emobench::corpus::{split_random, Fractions};
use emobench::synthetic::{random_embedding_table, vent_like_corpus, VentLikeConfig};
use emobench_cli::config::parse_config;
use emobench_cli::pipeline::train_run;

pub fn small_corpus() -> emobench::corpus::Corpus {
    vent_like_corpus(&VentLikeConfig {
        num_examples: 600,
        num_emotions: 12,
        noise_vocabulary: 200,
        ..VentLikeConfig::default()
    })
    .unwrap()
}

/// Trains a small artifact of the given learner JSON on the synthetic corpus.
pub fn artifact(representation: &str, learner: &str, dir: &Path) -> ModelArtifact {
    let corpus = small_corpus();
    let (train, val, _) = split_random(&corpus, Fractions::EIGHTY_TEN_TEN, 1).unwrap();
    let table_path = dir.join("vectors.txt");
    if !table_path.exists() {
        let cfg = VentLikeConfig {
            num_emotions: 12,
            noise_vocabulary: 200,
            ..VentLikeConfig::default()
        };
        random_embedding_table(&cfg.vocabulary(), 8, 3).unwrap().save(&table_path).unwrap();
    }
    let text = format!(
        r#"{{"data": {{"taxonomy": "t.json", "train": "a", "validation": "b"}}, "batch_size": 64,
            "representation": {representation}, "learner": {learner}}}"#
    );
    let cfg = parse_config::<emobench_cli::config::RunConfig>(&text)
        .unwrap()
        .finalize(dir)
        .unwrap();
    train_run(&cfg, &train, &val).unwrap().artifact
}

pub const TFIDF: &str = r#"{"kind": "tfidf", "vocabulary_size": 300}"#;
pub const NB: &str = r#"{"kind": "naive_bayes", "smoothing_factor": 0.1}"#;
pub const EMBED: &str = r#"{"kind": "embedding", "model": "vectors.txt", "max_length": 12}"#;
pub const DNN: &str = r#"{"kind": "dnn_pool", "hidden_size": 8, "num_layers": 1, "num_epochs": 2,
    "learning_rate": 0.01, "epsilon": 1e-6, "activation": "tanh", "pooling_function": "max"}"#;
