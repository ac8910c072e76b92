//! One-vs-all gradient-boosted trees over the entity feature matrix.

mod gbdt;
mod report;
mod split;

pub use gbdt::{train_gbdt, GbdtModel, GbdtParams, Node, Tree, EXACT_SPLIT_LIMIT, HISTOGRAM_BINS};
pub use report::{
    evaluate, feature_importance_report, report_from_confusion, ClassMetrics, ClassificationReport,
    ImportanceReport, OverallMetrics, RankedFeature,
};
pub use split::{split_train_test, SplitDescriptor};

use crate::graph_core::Category;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("class {0} has fewer than two rows")]
    TooFewRows(Category),
    #[error("training data contains only class {0}")]
    SingleClass(Category),
    #[error("no training rows")]
    Empty,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("feature columns differ from the model's")]
    ColumnMismatch,
    #[error("model document: {0}")]
    Model(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
