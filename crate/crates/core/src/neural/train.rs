use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{targets, Architecture, NeuralModel, OptimizerState};
use crate::error::{Error, Result};
use crate::eval::{metrics_from_decisions, decide, ThresholdVector};
use crate::features::EmbeddingSequence;

/// An embedded example with its gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub sequence: EmbeddingSequence,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            epsilon: 1e-6,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainingLog {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch log serializes") + "\n")
            .collect()
    }
}

/// Examples per gradient work unit. Fixed so that the reduction order, and
/// hence every parameter bit, is independent of the thread count.
const CHUNK: usize = 8;

fn batch_gradient(model: &NeuralModel, batch: &[&SequenceExample]) -> Result<(f64, Vec<f64>)> {
    let n = model.params().len();
    let num_labels = model.num_labels();
    let partials: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for ex in chunk {
                loss += model.accumulate(&ex.sequence, &targets(&ex.labels, num_labels), &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Micro-F1 at a uniform 0.5 threshold (argmax fallback included).
pub(crate) fn micro_f1(model: &NeuralModel, data: &[SequenceExample]) -> Result<f64> {
    let n = model.num_labels();
    let thresholds = ThresholdVector::uniform(n, 0.5);
    let decided: Vec<Vec<usize>> = data
        .par_iter()
        .map(|ex| Ok(decide(&model.forward(&ex.sequence)?, &thresholds)))
        .collect::<Result<_>>()?;
    let gold: Vec<Vec<usize>> = data.iter().map(|e| e.labels.clone()).collect();
    let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    Ok(metrics_from_decisions(&decided, &gold, &names)?.micro_f1)
}

/// Mini-batch AdamW training with per-epoch model selection on validation
/// micro-F1. Uses `train_set` for selection when `validation` is empty.
pub fn train(
    architecture: Architecture,
    train_set: &[SequenceExample],
    validation: &[SequenceExample],
    config: &TrainConfig,
    seed: u64,
) -> Result<(NeuralModel, TrainingLog)> {
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if config.batch_size == 0 || config.num_epochs == 0 {
        return Err(Error::InvalidArgument("batch size and epoch count must be positive".into()));
    }
    let mut model = NeuralModel::new(architecture, seed)?;
    let mut opt = OptimizerState::new(model.params().len(), config.learning_rate, config.epsilon, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0fb_a7c4);
    let selection = if validation.is_empty() { train_set } else { validation };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 1..=config.num_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&SequenceExample> = idx.iter().map(|&i| &train_set[i]).collect();
            let (loss, grad) = batch_gradient(&model, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                let checkpoint = if log.best_epoch > 0 {
                    format!("last good checkpoint is epoch {}", log.best_epoch)
                } else {
                    "no completed epoch to fall back to".to_string()
                };
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}, batch {}; {checkpoint}", b + 1)));
            }
            epoch_loss += loss * batch.len() as f64;
            opt.step(model.params_mut(), &grad);
        }
        let val_micro_f1 = micro_f1(&model, selection)?;
        log.epochs.push(EpochLog {
            epoch,
            loss: epoch_loss / train_set.len() as f64,
            val_micro_f1,
        });
        if best.as_ref().is_none_or(|(f, _)| val_micro_f1 > *f) {
            best = Some((val_micro_f1, model.params().to_vec()));
            log.best_epoch = epoch;
        }
    }
    let (_, params) = best.expect("at least one epoch ran");
    model.params_mut().copy_from_slice(&params);
    Ok((model, log))
}
