//! Ledger state of the address–transaction graph and multi-input clustering.

mod clustering;
mod ledger;
mod types;

pub use clustering::{canonical, cluster_multi_input, AddressClustering, Partition, UnionFind};
pub use ledger::{
    AddressState, DegreeSnapshot, EntityRecord, Ledger, LedgerDelta, LedgerError, ValueAccounts,
};
pub use types::{
    sat_to_btc, AddressId, Block, Category, EntityId, TransactionRecord, TxId, TxInput, TxOutput,
    UtxoId, SAT_PER_BTC,
};
