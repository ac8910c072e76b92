//! Generative samplers for blocks under the address-level and the
//! entity-level model, including coinbase and subset-boundary flows.

mod chain;
mod params;
mod sampler;
mod state;

use thiserror::Error;

use crate::graph_core::{Category, LedgerError};

pub use chain::{
    simulate_chain, Model, SimulationConfig, SimulationOutput, Simulator, BLOCK_INTERVAL_SECS,
    GENESIS_TIMESTAMP,
};
pub use params::{CategoryParams, CategorySpec, EntityLayout, FeeParams, ModelParams, SubsetParams, TxShape};
pub use sampler::{boundary_amount, draw_fee, split_value, EntityModel, OutputTarget};
pub use state::{ChainState, Draft, Scope};

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("funding exhausted at block {height}: {needed} more funded addresses required")]
    Exhausted { height: u64, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no entities of category {0}")]
    NoEntities(Category),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}
