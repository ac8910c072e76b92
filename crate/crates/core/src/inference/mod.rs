//! Maximum-likelihood fitting from block streams, the input/output
//! independence diagnostic and holdout error metrics.

mod ccdf;
mod fit;
mod holdout;
mod stats;

use thiserror::Error;

use crate::block_model::BlockError;
use crate::distributions::DistError;
use crate::graph_core::LedgerError;

pub use ccdf::{empirical_ccdf, utxo_value_ccdf, write_ccdf, CcdfPoint};
pub use fit::{fit_bta, fit_btea, independence_diagnostic, replay, route, FitReport, Routing};
pub use holdout::{error_metrics, ErrorMetrics, ALL_SCOPE, holdout_evaluate, output_values_by_scope, ErrorReport, ErrorRow, HoldoutConfig};
pub use stats::{Moments, PairSums, SampleCounts, ScopeFit, SufficientStats};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("no ordinary transactions to fit")]
    Empty,
    #[error("need at least 2 transactions, got {0}")]
    TooFewTransactions(u64),
    #[error("correlation undefined: a margin has zero variance")]
    UndefinedCorrelation,
    #[error(transparent)]
    Distribution(#[from] DistError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Simulation(#[from] BlockError),
}
