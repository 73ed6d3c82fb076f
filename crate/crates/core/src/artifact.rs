//! The self-contained model artifact and the text-to-prediction pipeline.
//!
//! On disk an artifact is a single binary container:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `EMOB` |
//! | 4 | format version, little-endian `u32` |
//! | 8 | total file length including the checksum, little-endian `u64` |
//! | 4 | section count, little-endian `u32` |
//! | ... | sections: `u16` name length, UTF-8 name, `u64` payload length, JSON payload |
//! | 32 | SHA-256 of every preceding byte |
//!
//! Sections are `taxonomy`, `features`, `learner`, `thresholds`, `metadata`
//! and optionally `hierarchy`. Floats are written with round-trip precision,
//! so a loaded model scores bit-identically to the saved one.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{normalize_text, tokenize, Corpus};
use crate::error::{Error, Result};
use crate::eval::{category_pool, decide, ThresholdVector};
use crate::features::{embed_sequence, EmbeddingSequence, EmbeddingTable, SparseFeaturizer, SparseVector};
use crate::hierarchy::Dendrogram;
use crate::learners::StatisticalModel;
use crate::neural::NeuralModel;
use crate::taxonomy::EmotionTaxonomy;

pub const ARTIFACT_MAGIC: [u8; 4] = *b"EMOB";
pub const ARTIFACT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;
const CHECKSUM_LEN: usize = 32;

/// How raw text becomes model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpace {
    Sparse {
        featurizer: SparseFeaturizer,
    },
    Embedding {
        /// Where the bundled table came from, e.g. a file name.
        source: String,
        max_length: usize,
        table: EmbeddingTable,
    },
}

/// Model input for one text.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(SparseVector),
    Sequence(EmbeddingSequence),
}

impl FeatureSpace {
    pub fn featurize(&self, tokens: &[String]) -> Result<Features> {
        match self {
            FeatureSpace::Sparse { featurizer } => featurizer.vectorize(tokens).map(Features::Sparse),
            FeatureSpace::Embedding { table, max_length, .. } => {
                embed_sequence(tokens, table, *max_length).map(Features::Sequence)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeatureSpace::Sparse {
                featurizer: SparseFeaturizer::Bow { .. },
            } => "bow",
            FeatureSpace::Sparse {
                featurizer: SparseFeaturizer::Tfidf { .. },
            } => "tfidf",
            FeatureSpace::Embedding { .. } => "embedding",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureSpace::Sparse { featurizer } => featurizer.dim(),
            FeatureSpace::Embedding { table, .. } => table.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Learner {
    Statistical { model: StatisticalModel },
    Neural { model: NeuralModel },
}

impl Learner {
    pub fn num_labels(&self) -> usize {
        match self {
            Learner::Statistical { model } => model.num_labels(),
            Learner::Neural { model } => model.architecture().num_labels(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Learner::Statistical { model } => model.dim(),
            Learner::Neural { model } => model.architecture().input_dim(),
        }
    }

    /// Short family name: `naive_bayes`, `logistic_regression`,
    /// `random_forest`, `pooled_dnn` or `bilstm`.
    pub fn family(&self) -> &'static str {
        match self {
            Learner::Statistical { model } => match model {
                StatisticalModel::NaiveBayes(_) => "naive_bayes",
                StatisticalModel::LogisticRegression(_) => "logistic_regression",
                StatisticalModel::RandomForest(_) => "random_forest",
            },
            Learner::Neural { model } => match model.architecture() {
                crate::neural::Architecture::PooledDnn { .. } => "pooled_dnn",
                crate::neural::Architecture::BiLstm { .. } => "bilstm",
            },
        }
    }

    pub fn score(&self, features: &Features) -> Result<Vec<f64>> {
        match (self, features) {
            (Learner::Statistical { model }, Features::Sparse(x)) => model.score(x),
            (Learner::Neural { model }, Features::Sequence(s)) => model.forward(s),
            _ => Err(Error::InvalidArgument("feature space does not match the learner".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// The run configuration, keyed by hyperparameter name.
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    /// See [`data_fingerprint`].
    pub data_fingerprint: String,
    pub created_at: String,
}

/// SHA-256 over example ids and writer labels, in order.
pub fn data_fingerprint(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    for ex in &corpus.examples {
        h.update(ex.id.as_bytes());
        h.update([0]);
        for l in &ex.writer_labels {
            h.update((*l as u32).to_le_bytes());
        }
        h.update([0xff]);
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScore {
    pub name: String,
    pub category: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub name: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub emotions: Vec<EmotionScore>,
    /// Max over member emotions.
    pub categories: Vec<CategoryScore>,
    /// Emotions at or above their threshold.
    pub decided: Vec<String>,
}

/// Everything needed to score raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub taxonomy: EmotionTaxonomy,
    pub features: FeatureSpace,
    pub learner: Learner,
    pub thresholds: ThresholdVector,
    pub metadata: TrainingMetadata,
    pub hierarchy: Option<Dendrogram>,
}

impl ModelArtifact {
    pub fn new(
        taxonomy: EmotionTaxonomy,
        features: FeatureSpace,
        learner: Learner,
        thresholds: ThresholdVector,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let a = Self {
            taxonomy,
            features,
            learner,
            thresholds,
            metadata,
            hierarchy: None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn with_hierarchy(mut self, hierarchy: Dendrogram) -> Self {
        self.hierarchy = Some(hierarchy);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.taxonomy.len();
        for (what, got) in [("learner", self.learner.num_labels()), ("thresholds", self.thresholds.len())] {
            if got != n {
                return Err(Error::Malformed(format!("{what} covers {got} labels, taxonomy has {n}")));
            }
        }
        if self.learner.input_dim() != self.features.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.features.dim(),
                actual: self.learner.input_dim(),
            });
        }
        Ok(())
    }

    pub fn score_tokens(&self, tokens: &[String]) -> Result<Vec<f64>> {
        self.learner.score(&self.features.featurize(tokens)?)
    }

    /// Per-emotion probabilities for raw text.
    pub fn score_text(&self, text: &str) -> Result<Vec<f64>> {
        self.score_tokens(&tokenize(&normalize_text(text)))
    }

    pub fn predict(&self, text: &str) -> Result<Prediction> {
        let scores = self.score_text(text)?;
        let tax = &self.taxonomy;
        let emotions = scores
            .iter()
            .enumerate()
            .map(|(i, &p)| EmotionScore {
                name: tax.emotion_name(i).to_string(),
                category: tax.category_name(tax.category_of(i)).to_string(),
                probability: p,
            })
            .collect();
        let categories = category_pool(&scores, tax)
            .into_iter()
            .enumerate()
            .map(|(c, p)| CategoryScore {
                name: tax.category_name(c).to_string(),
                probability: p,
            })
            .collect();
        let decided = decide(&scores, &self.thresholds)
            .into_iter()
            .map(|i| tax.emotion_name(i).to_string())
            .collect();
        Ok(Prediction {
            emotions,
            categories,
            decided,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut sections: Vec<(&str, Vec<u8>)> = vec![
            ("taxonomy", serde_json::to_vec(&self.taxonomy)?),
            ("features", serde_json::to_vec(&self.features)?),
            ("learner", serde_json::to_vec(&self.learner)?),
            ("thresholds", serde_json::to_vec(&self.thresholds)?),
            ("metadata", serde_json::to_vec(&self.metadata)?),
        ];
        if let Some(h) = &self.hierarchy {
            sections.push(("hierarchy", serde_json::to_vec(h)?));
        }
        encode_container(ARTIFACT_VERSION, &sections)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let sections = decode_container(bytes)?;
        let mut features: FeatureSpace = section(&sections, "features")?;
        if let FeatureSpace::Embedding { table, .. } = &mut features {
            table.reindex();
        }
        let mut learner: Learner = section(&sections, "learner")?;
        if let Learner::Neural { model } = &learner {
            let checked = NeuralModel::from_parts(model.architecture().clone(), model.params().to_vec())?;
            learner = Learner::Neural { model: checked };
        }
        let thresholds: Vec<f64> = section(&sections, "thresholds")?;
        let artifact = Self {
            taxonomy: section(&sections, "taxonomy")?,
            features,
            learner,
            thresholds: ThresholdVector::new(thresholds)?,
            metadata: section(&sections, "metadata")?,
            hierarchy: match sections.get("hierarchy") {
                Some(_) => Some(section(&sections, "hierarchy")?),
                None => None,
            },
        };
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn section<T: DeserializeOwned>(sections: &BTreeMap<String, &[u8]>, name: &str) -> Result<T> {
    let raw = sections
        .get(name)
        .ok_or_else(|| Error::Malformed(format!("missing section '{name}'")))?;
    serde_json::from_slice(raw).map_err(|e| Error::Malformed(format!("section '{name}': {e}")))
}

/// Writes the container framing around already-serialized sections.
pub fn encode_container(version: u32, sections: &[(&str, Vec<u8>)]) -> Result<Vec<u8>> {
    let body: usize = sections.iter().map(|(n, p)| 2 + n.len() + 8 + p.len()).sum();
    let total = HEADER_LEN + body + CHECKSUM_LEN;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&ARTIFACT_MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(total as u64).to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, payload) in sections {
        let name_len = u16::try_from(name.len()).map_err(|_| Error::InvalidArgument(format!("section name too long: {name}")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Malformed(format!("section table overruns the body at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Validates framing, version, length and checksum, returning the raw
/// section payloads by name.
pub fn decode_container(bytes: &[u8]) -> Result<BTreeMap<String, &[u8]>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if bytes[..4] != ARTIFACT_MAGIC {
        return Err(Error::Malformed("not an EMOB artifact (bad magic)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = cur.u32()?;
    if version != ARTIFACT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: ARTIFACT_VERSION,
        });
    }
    let total = cur.u64()?;
    if (bytes.len() as u64) < total {
        return Err(Error::Truncated(format!("{} of {total} bytes present", bytes.len())));
    }
    if bytes.len() as u64 > total {
        return Err(Error::Malformed(format!("{} trailing bytes after the checksum", bytes.len() as u64 - total)));
    }
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(Error::Malformed("declared length leaves no room for the checksum".into()));
    }
    let body_end = bytes.len() - CHECKSUM_LEN;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(Error::Checksum);
    }
    let count = cur.u32()?;
    let mut cur = Cursor {
        bytes: &bytes[..body_end],
        pos: cur.pos,
    };
    let mut sections = BTreeMap::new();
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Malformed("section name is not UTF-8".into()))?
            .to_string();
        let len = usize::try_from(cur.u64()?).map_err(|_| Error::Malformed("section too large".into()))?;
        let payload = cur.take(len)?;
        if sections.insert(name.clone(), payload).is_some() {
            return Err(Error::Malformed(format!("duplicate section '{name}'")));
        }
    }
    if cur.pos != body_end {
        return Err(Error::Malformed("unused bytes after the last section".into()));
    }
    Ok(sections)
}
