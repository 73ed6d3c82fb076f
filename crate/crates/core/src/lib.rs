//! Multi-label text emotion classification.
//!
//! The crate covers the whole benchmark pipeline: emotion taxonomies and
//! corpora ([`corpus`]), sparse and embedded feature spaces ([`features`]),
//! statistical learners over sparse vectors ([`learners`]), pooled neural
//! heads over embedding sequences trained with hand-written backpropagation
//! ([`neural`]), multi-label evaluation ([`eval`]), confusion-based emotion
//! hierarchies ([`hierarchy`]), reader/writer annotation analysis
//! ([`annotation`]) and the self-contained model artifact ([`artifact`]).

pub mod annotation;
pub mod artifact;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hierarchy;
pub mod learners;
pub mod neural;
pub mod stats;
pub mod synthetic;
pub mod taxonomy;

pub use error::{Error, Result};
pub use taxonomy::EmotionTaxonomy;
