//! Attacker model for address re-use across an entity's aliases.

mod analytic;
mod attacker;
mod simulate;

pub use analytic::{
    brute_force_expected_discovered, expected_discovered, expected_discovered_asymptotic, AliasPartition,
    MAX_ORACLE_ALIASES, MAX_ORACLE_LAMBDA, MAX_OUTCOMES_PER_N,
};
pub use attacker::{attacker_observe, AttackerKnowledge};
pub use simulate::{
    random_partition, simulate_attack, simulate_trial, write_curves, AliasGeometry, AliasSource, AttackAxis,
    AttackConfig, AttackCurves, CurvePoint,
};

use crate::graph_core::Category;

#[derive(Debug, thiserror::Error)]
pub enum PrivacyError {
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("invalid alias partition: {0}")]
    InvalidPartition(String),
    #[error("enumeration refused: {0}")]
    TooLarge(String),
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
    #[error("no parameters for category {0}")]
    MissingCategory(Category),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
