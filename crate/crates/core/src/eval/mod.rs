//! Multi-label evaluation: decision rule, metrics, threshold tuning, the
//! random baseline and category-level pooling.

mod metrics;
mod predictions;
mod thresholds;

pub use metrics::{compute_metrics, metrics_from_decisions, per_category_report, LabelMetrics, MetricsReport};
pub use predictions::{category_pool, decide, random_baseline, random_scores, PredictionSet};
pub use thresholds::{default_grid, tune_thresholds, ThresholdVector};
