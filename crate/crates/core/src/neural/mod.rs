//! Pooled neural heads over embedding sequences: a token-wise DNN and a
//! stacked (Bi-)LSTM, each projecting every token to `N` label logits that
//! are pooled over real tokens. Backpropagation is written by hand.

mod adamw;
mod dnn;
mod gradcheck;
mod head;
mod loss;
mod lstm;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use adamw::OptimizerState;
pub use gradcheck::{gradient_check, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use head::pool;
pub use loss::{bce_logit_gradient, bce_loss, BCE_EPSILON};
pub use train::{train, EpochLog, SequenceExample, TrainConfig, TrainingLog};

use crate::error::{Error, Result};
use crate::features::EmbeddingSequence;
use dnn::DnnEncoder;
use head::Head;
use lstm::LstmEncoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Max,
    Mean,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    PooledDnn {
        input_dim: usize,
        hidden_size: usize,
        num_layers: usize,
        activation: Activation,
        pooling: Pooling,
        num_labels: usize,
    },
    BiLstm {
        input_dim: usize,
        hidden_size: usize,
        num_layers: usize,
        bidirectional: bool,
        pooling: Pooling,
        num_labels: usize,
    },
}

enum Encoder {
    Dnn(DnnEncoder),
    Lstm(LstmEncoder),
}

enum EncoderCache {
    Dnn(dnn::DnnCache),
    Lstm(lstm::LstmCache),
}

impl Encoder {
    fn num_params(&self) -> usize {
        match self {
            Self::Dnn(e) => e.num_params(),
            Self::Lstm(e) => e.num_params(),
        }
    }

    fn width(&self) -> usize {
        match self {
            Self::Dnn(e) => e.width(),
            Self::Lstm(e) => e.width(),
        }
    }

    fn forward(&self, p: &[f64], xs: &[&[f64]]) -> (Vec<Vec<f64>>, EncoderCache) {
        match self {
            Self::Dnn(e) => {
                let (f, c) = e.forward(p, xs);
                (f, EncoderCache::Dnn(c))
            }
            Self::Lstm(e) => {
                let (f, c) = e.forward(p, xs);
                (f, EncoderCache::Lstm(c))
            }
        }
    }

    fn backward(&self, p: &[f64], cache: &EncoderCache, dfeatures: &[Vec<f64>], grad: &mut [f64]) {
        match (self, cache) {
            (Self::Dnn(e), EncoderCache::Dnn(c)) => e.backward(p, c, dfeatures, grad),
            (Self::Lstm(e), EncoderCache::Lstm(c)) => e.backward(p, c, dfeatures, grad),
            _ => unreachable!("encoder and cache kinds always match"),
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        match self {
            Self::PooledDnn { input_dim, .. } | Self::BiLstm { input_dim, .. } => *input_dim,
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Self::PooledDnn { num_labels, .. } | Self::BiLstm { num_labels, .. } => *num_labels,
        }
    }

    pub fn pooling(&self) -> Pooling {
        match self {
            Self::PooledDnn { pooling, .. } | Self::BiLstm { pooling, .. } => *pooling,
        }
    }

    fn validate(&self) -> Result<()> {
        let (input_dim, hidden, layers, labels) = match self {
            Self::PooledDnn {
                input_dim,
                hidden_size,
                num_layers,
                num_labels,
                ..
            }
            | Self::BiLstm {
                input_dim,
                hidden_size,
                num_layers,
                num_labels,
                ..
            } => (*input_dim, *hidden_size, *num_layers, *num_labels),
        };
        if input_dim == 0 || hidden == 0 || layers == 0 || labels == 0 {
            return Err(Error::InvalidArgument(
                "input dimension, hidden size, layer count and label count must all be positive".into(),
            ));
        }
        Ok(())
    }

    fn encoder(&self) -> Encoder {
        match *self {
            Self::PooledDnn {
                input_dim,
                hidden_size,
                num_layers,
                activation,
                ..
            } => Encoder::Dnn(DnnEncoder {
                input_dim,
                hidden_size,
                num_layers,
                activation,
            }),
            Self::BiLstm {
                input_dim,
                hidden_size,
                num_layers,
                bidirectional,
                ..
            } => Encoder::Lstm(LstmEncoder {
                input_dim,
                hidden_size,
                num_layers,
                bidirectional,
            }),
        }
    }

    fn head(&self, width: usize) -> Head {
        Head {
            width,
            num_labels: self.num_labels(),
            pooling: self.pooling(),
        }
    }

    pub fn num_params(&self) -> usize {
        let e = self.encoder();
        e.num_params() + self.head(e.width()).num_params()
    }
}

/// A pooled neural head with its flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    architecture: Architecture,
    params: Vec<f64>,
}

impl NeuralModel {
    /// Uniform `±1/√fan_in` initialization; LSTM forget-gate biases start at one.
    pub fn new(architecture: Architecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let encoder = architecture.encoder();
        let width = encoder.width();
        let enc_params = encoder.num_params();
        let mut params = vec![0.0; architecture.num_params()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = match &encoder {
            Encoder::Dnn(e) => e.blocks(),
            Encoder::Lstm(e) => e.blocks(),
        };
        for (off, len, fan_in) in blocks {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[off..off + len] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        if let Encoder::Lstm(e) = &encoder {
            for r in e.forget_biases() {
                params[r].fill(1.0);
            }
        }
        let bound = 1.0 / (width as f64).sqrt();
        for p in &mut params[enc_params..] {
            *p = rng.gen_range(-bound..bound);
        }
        Ok(Self { architecture, params })
    }

    pub fn from_parts(architecture: Architecture, params: Vec<f64>) -> Result<Self> {
        architecture.validate()?;
        if params.len() != architecture.num_params() {
            return Err(Error::DimensionMismatch {
                expected: architecture.num_params(),
                actual: params.len(),
            });
        }
        Ok(Self { architecture, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_labels(&self) -> usize {
        self.architecture.num_labels()
    }

    /// Index range of the output projection (weights and biases) in [`Self::params`].
    pub fn output_projection(&self) -> std::ops::Range<usize> {
        let e = self.architecture.encoder();
        let start = e.num_params();
        start..start + self.num_labels() * (e.width() + 1)
    }

    /// Hex SHA-256 of the little-endian parameter bytes.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn real_rows<'a>(&self, seq: &'a EmbeddingSequence) -> Result<Vec<&'a [f64]>> {
        if seq.dim != self.architecture.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.input_dim(),
                actual: seq.dim,
            });
        }
        let rows: Vec<&[f64]> = seq.real_positions().into_iter().map(|t| seq.row(t)).collect();
        if rows.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(rows)
    }

    /// Pooled logits, and when `targets` is given, the loss with its
    /// gradient accumulated into `grad`.
    fn run(&self, params: &[f64], seq: &EmbeddingSequence, targets: Option<(&[f64], &mut [f64])>) -> Result<(Vec<f64>, f64)> {
        let xs = self.real_rows(seq)?;
        let encoder = self.architecture.encoder();
        let split = encoder.num_params();
        let head = self.architecture.head(encoder.width());
        let (pe, ph) = params.split_at(split);
        let (features, cache) = encoder.forward(pe, &xs);
        let hc = head.forward(ph, &features);
        let Some((y, grad)) = targets else {
            return Ok((hc.pooled, 0.0));
        };
        if y.len() != self.num_labels() {
            return Err(Error::DimensionMismatch {
                expected: self.num_labels(),
                actual: y.len(),
            });
        }
        let probs: Vec<f64> = hc.pooled.iter().map(|&z| sigmoid(z)).collect();
        let loss = bce_loss(&probs, y);
        let dpooled = bce_logit_gradient(&probs, y);
        let (ge, gh) = grad.split_at_mut(split);
        let dfeat = head.backward(ph, &features, &hc, &dpooled, gh);
        encoder.backward(pe, &cache, &dfeat, ge);
        Ok((hc.pooled, loss))
    }

    pub fn pooled_logits(&self, seq: &EmbeddingSequence) -> Result<Vec<f64>> {
        Ok(self.run(&self.params, seq, None)?.0)
    }

    /// Label probabilities for one sequence.
    pub fn forward(&self, seq: &EmbeddingSequence) -> Result<Vec<f64>> {
        Ok(self.pooled_logits(seq)?.into_iter().map(sigmoid).collect())
    }

    /// BCE loss for one example with its gradient over all parameters.
    pub fn loss_and_gradient(&self, seq: &EmbeddingSequence, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let (_, loss) = self.run(&self.params, seq, Some((targets, &mut grad)))?;
        Ok((loss, grad))
    }

    /// Loss with gradient accumulated into `grad`.
    pub(crate) fn accumulate(&self, seq: &EmbeddingSequence, targets: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self.run(&self.params, seq, Some((targets, grad)))?.1)
    }

    /// Loss at arbitrary parameters, used by finite differences.
    pub(crate) fn loss_at(&self, params: &[f64], seq: &EmbeddingSequence, targets: &[f64]) -> Result<f64> {
        let probs: Vec<f64> = self.run(params, seq, None)?.0.into_iter().map(sigmoid).collect();
        Ok(bce_loss(&probs, targets))
    }
}

fn sigmoid(z: f64) -> f64 {
    crate::learners::sigmoid(z)
}

/// Multi-hot target vector.
pub fn targets(labels: &[usize], num_labels: usize) -> Vec<f64> {
    let mut y = vec![0.0; num_labels];
    for &l in labels {
        y[l] = 1.0;
    }
    y
}
