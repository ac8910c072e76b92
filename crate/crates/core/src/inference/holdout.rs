use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::{route, Routing};
use super::InferenceError;
use crate::block_model::{Model, SimulationConfig, Simulator, SubsetParams};
use crate::graph_core::{sat_to_btc, Block};
use crate::io::LabelTable;

pub const ALL_SCOPE: &str = "All";

/// Error metrics of a constant predictor against observed output values, BTC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub scope: String,
    pub count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<ErrorMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub prediction_btc: f64,
    pub mean_btc: f64,
    pub sigma_btc: f64,
    /// Mean of prediction − observation.
    pub mse_signed: f64,
    pub rmse: f64,
    pub mae: f64,
    /// MAE relative to the observed mean.
    pub rmae: f64,
    /// RMSE relative to the observed population standard deviation; absent
    /// when that deviation is zero but the error is not.
    pub nrmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn row(&self, scope: &str) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.scope == scope)
    }
}

pub fn error_metrics(prediction: f64, observed: &[f64]) -> Option<ErrorMetrics> {
    if observed.is_empty() {
        return None;
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let sigma = (observed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mse_signed = observed.iter().map(|x| prediction - x).sum::<f64>() / n;
    let rmse = (observed.iter().map(|x| (prediction - x).powi(2)).sum::<f64>() / n).sqrt();
    let mae = observed.iter().map(|x| (prediction - x).abs()).sum::<f64>() / n;
    let rmae = if mae == 0.0 { 0.0 } else { mae / mean };
    let nrmse = if rmse == 0.0 {
        Some(0.0)
    } else if sigma > 0.0 {
        Some(rmse / sigma)
    } else {
        None
    };
    Some(ErrorMetrics { prediction_btc: prediction, mean_btc: mean, sigma_btc: sigma, mse_signed, rmse, mae, rmae, nrmse })
}

/// Internal output UTXO values of ordinary transactions, in satoshi, keyed by
/// scope: `All` plus the input category when labels are given.
pub fn output_values_by_scope(blocks: &[Block], labels: Option<&LabelTable>) -> BTreeMap<String, Vec<u64>> {
    let mut out: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    out.entry(ALL_SCOPE.to_string()).or_default();
    for tx in blocks.iter().flat_map(|b| &b.transactions).filter(|t| t.is_ordinary()) {
        let scope = match labels.map(|l| route(tx, l)) {
            Some(Routing::Contradiction) => continue,
            Some(Routing::Category(c)) => Some(c.to_string()),
            None => None,
        };
        let values: Vec<u64> = tx.internal_outputs().flat_map(|o| o.values.iter().copied()).collect();
        out.get_mut(ALL_SCOPE).expect("inserted").extend(&values);
        if let Some(s) = scope {
            out.entry(s).or_default().extend(values);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoldoutConfig {
    /// Output values to collect for the predictor in the `All` scope.
    pub min_values: usize,
    pub max_blocks: u64,
    pub seed: u64,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        Self { min_values: 100_000, max_blocks: 20_000, seed: 0x5eed }
    }
}

/// Scores the model's conditional mean of an output UTXO value, estimated by
/// simulating the model, as a constant predictor per scope of the test stream.
pub fn holdout_evaluate(
    model: &Model,
    subset: &SubsetParams,
    test_blocks: &[Block],
    test_labels: Option<&LabelTable>,
    config: HoldoutConfig,
) -> Result<ErrorReport, InferenceError> {
    let mut sim = Simulator::new(model.clone(), *subset, SimulationConfig::new(config.max_blocks, config.seed))?;
    let mut blocks = Vec::new();
    let mut collected = 0usize;
    while (collected < config.min_values || (blocks.len() as u64) < test_blocks.len() as u64)
        && sim.height() < config.max_blocks
    {
        let b = sim.next_block()?;
        collected += b
            .transactions
            .iter()
            .filter(|t| t.is_ordinary())
            .flat_map(|t| t.internal_outputs())
            .map(|o| o.values.len())
            .sum::<usize>();
        blocks.push(b);
    }
    let sim_labels = LabelTable::from_rows(sim.labels()).map_err(|e| {
        InferenceError::Simulation(crate::block_model::BlockError::InvalidParams(e.to_string()))
    })?;
    let sim_labels = (!sim_labels.is_empty()).then_some(sim_labels);
    let predicted = output_values_by_scope(&blocks, sim_labels.as_ref());
    let observed = output_values_by_scope(test_blocks, test_labels);

    let mut rows = Vec::new();
    for (scope, values) in &observed {
        let obs: Vec<f64> = values.iter().map(|&v| sat_to_btc(v)).collect();
        let metrics = predicted
            .get(scope)
            .filter(|p| !p.is_empty())
            .and_then(|p| {
                let mean = p.iter().map(|&v| sat_to_btc(v)).sum::<f64>() / p.len() as f64;
                error_metrics(mean, &obs)
            });
        let count = if metrics.is_some() { obs.len() as u64 } else { 0 };
        rows.push(ErrorRow { scope: scope.clone(), count, metrics });
    }
    Ok(ErrorReport { rows })
}
