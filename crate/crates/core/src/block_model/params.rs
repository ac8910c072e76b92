use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BlockError;
use crate::graph_core::{Category, SAT_PER_BTC};

/// Shape of a single transaction: input/output counts, fresh-address rate
/// and UTXO multiplicities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxShape {
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub p_new: f64,
    pub p_utxo_in: f64,
    pub p_utxo_out: f64,
}

impl TxShape {
    pub fn validate(&self) -> Result<(), BlockError> {
        positive("lambda_in", self.lambda_in)?;
        positive("lambda_out", self.lambda_out)?;
        if !(0.0..=1.0).contains(&self.p_new) {
            return Err(BlockError::InvalidParams(format!("p_new must lie in [0, 1], got {}", self.p_new)));
        }
        probability("p_utxo_in", self.p_utxo_in)?;
        probability("p_utxo_out", self.p_utxo_out)
    }
}

fn positive(name: &str, x: f64) -> Result<(), BlockError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(BlockError::InvalidParams(format!("{name} must be positive, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<(), BlockError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(BlockError::InvalidParams(format!("{name} must be non-negative, got {x}")))
    }
}

fn probability(name: &str, p: f64) -> Result<(), BlockError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(BlockError::InvalidParams(format!("{name} must lie in (0, 1], got {p}")))
    }
}

/// Global generative parameters of the address-level model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda_size: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub p_new: f64,
    pub p_utxo_in: f64,
    pub p_utxo_out: f64,
    pub mu_fee_sat: f64,
    pub sigma_fee_sat: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda_size: 65.6,
            lambda_in: 2.99,
            lambda_out: 1.21,
            p_new: 0.26,
            p_utxo_in: 0.92,
            p_utxo_out: 1.00,
            mu_fee_sat: 20_000.0,
            sigma_fee_sat: 15_000.0,
        }
    }
}

impl ModelParams {
    pub fn shape(&self) -> TxShape {
        TxShape {
            lambda_in: self.lambda_in,
            lambda_out: self.lambda_out,
            p_new: self.p_new,
            p_utxo_in: self.p_utxo_in,
            p_utxo_out: self.p_utxo_out,
        }
    }

    pub fn fee(&self) -> FeeParams {
        FeeParams { mu_sat: self.mu_fee_sat, sigma_sat: self.sigma_fee_sat }
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        positive("lambda_size", self.lambda_size)?;
        self.shape().validate()?;
        self.fee().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeParams {
    pub mu_sat: f64,
    pub sigma_sat: f64,
}

impl FeeParams {
    pub fn validate(&self) -> Result<(), BlockError> {
        if !self.mu_sat.is_finite() {
            return Err(BlockError::InvalidParams(format!("mu_fee_sat must be finite, got {}", self.mu_sat)));
        }
        non_negative("sigma_fee_sat", self.sigma_sat)
    }
}

/// Per-category transaction shape plus the category's share of transactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub p_new: f64,
    pub p_utxo_in: f64,
    pub p_utxo_out: f64,
    pub activity: f64,
}

impl CategorySpec {
    pub fn shape(&self) -> TxShape {
        TxShape {
            lambda_in: self.lambda_in,
            lambda_out: self.lambda_out,
            p_new: self.p_new,
            p_utxo_in: self.p_utxo_in,
            p_utxo_out: self.p_utxo_out,
        }
    }
}

/// Category-conditioned parameters of the entity-level model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryParams {
    pub categories: BTreeMap<Category, CategorySpec>,
}

impl Default for CategoryParams {
    fn default() -> Self {
        let rows = [
            (Category::Exchange, 3.79, 0.68, 0.23, 0.95, 0.33),
            (Category::Service, 2.58, 1.96, 0.20, 0.92, 0.55),
            (Category::Gambling, 1.98, 0.21, 0.47, 0.84, 0.09),
            (Category::MiningPool, 21.2, 7.04, 0.55, 0.67, 0.03),
        ];
        let categories = rows
            .into_iter()
            .map(|(c, lambda_in, lambda_out, p_new, p_utxo_in, activity)| {
                let spec = CategorySpec { lambda_in, lambda_out, p_new, p_utxo_in, p_utxo_out: 1.0, activity };
                (c, spec)
            })
            .collect();
        Self { categories }
    }
}

impl CategoryParams {
    pub const ACTIVITY_TOLERANCE: f64 = 1e-6;

    pub fn validate(&self) -> Result<(), BlockError> {
        if self.categories.is_empty() {
            return Err(BlockError::InvalidParams("no categories".into()));
        }
        let mut total = 0.0;
        for (c, spec) in &self.categories {
            spec.shape()
                .validate()
                .map_err(|e| BlockError::InvalidParams(format!("{c}: {e}")))?;
            non_negative("activity", spec.activity)?;
            total += spec.activity;
        }
        if (total - 1.0).abs() > Self::ACTIVITY_TOLERANCE {
            return Err(BlockError::InvalidParams(format!("activity weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn get(&self, c: Category) -> Option<&CategorySpec> {
        self.categories.get(&c)
    }
}

/// Parameters of the flows crossing the modeled subset's edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetParams {
    /// External output addresses appended per ordinary transaction.
    pub lambda_sub: f64,
    /// Inputless incoming transactions per block.
    pub lambda_size_sub: f64,
    pub lambda_out_sub: f64,
    pub p_new_sub: f64,
    pub p_utxo_out_sub: f64,
    pub coinbase_reward_sat: u64,
    pub boundary_value_mean_sat: f64,
}

impl Default for SubsetParams {
    fn default() -> Self {
        Self {
            lambda_sub: 0.5,
            lambda_size_sub: 40.0,
            lambda_out_sub: 3.0,
            p_new_sub: 0.5,
            p_utxo_out_sub: 1.0,
            coinbase_reward_sat: 1_250_000_000,
            boundary_value_mean_sat: SAT_PER_BTC as f64,
        }
    }
}

impl SubsetParams {
    pub fn validate(&self) -> Result<(), BlockError> {
        non_negative("lambda_sub", self.lambda_sub)?;
        non_negative("lambda_size_sub", self.lambda_size_sub)?;
        positive("lambda_out_sub", self.lambda_out_sub)?;
        if !(0.0..=1.0).contains(&self.p_new_sub) {
            return Err(BlockError::InvalidParams(format!("p_new_sub must lie in [0, 1], got {}", self.p_new_sub)));
        }
        probability("p_utxo_out_sub", self.p_utxo_out_sub)?;
        if self.coinbase_reward_sat == 0 {
            return Err(BlockError::InvalidParams("coinbase_reward_sat must be positive".into()));
        }
        positive("boundary_value_mean_sat", self.boundary_value_mean_sat)
    }
}

/// Number of entities per category in an entity-level simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityLayout {
    pub counts: BTreeMap<Category, u32>,
}

impl EntityLayout {
    pub fn uniform(per_category: u32) -> Self {
        Self { counts: Category::LABELED.iter().map(|&c| (c, per_category)).collect() }
    }
}

impl Default for EntityLayout {
    fn default() -> Self {
        Self::uniform(40)
    }
}
