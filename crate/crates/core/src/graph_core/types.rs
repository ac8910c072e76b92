use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Satoshi per bitcoin.
pub const SAT_PER_BTC: u64 = 100_000_000;

pub fn sat_to_btc(sat: u64) -> f64 {
    sat as f64 / SAT_PER_BTC as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AddressId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl fmt::Display for AddressId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies an output as `(creating transaction, flat output index)`.
///
/// The index runs over every created UTXO of the transaction in output order,
/// external outputs included. On the wire it is written as `"<tx>:<index>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtxoId {
    pub tx: TxId,
    pub index: u32,
}

impl UtxoId {
    pub fn new(tx: TxId, index: u32) -> Self {
        Self { tx, index }
    }
}

impl fmt::Display for UtxoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tx.0, self.index)
    }
}

impl FromStr for UtxoId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tx, index) = s
            .split_once(':')
            .ok_or_else(|| format!("utxo id `{s}` is not of the form <tx>:<index>"))?;
        let tx = tx.parse::<u64>().map_err(|e| format!("utxo id `{s}`: {e}"))?;
        let index = index.parse::<u32>().map_err(|e| format!("utxo id `{s}`: {e}"))?;
        Ok(Self::new(TxId(tx), index))
    }
}

impl Serialize for UtxoId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UtxoId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Functional category of the logical agent behind an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Exchange,
    Service,
    Gambling,
    MiningPool,
    Unknown,
}

impl Category {
    /// The four labeled categories, in canonical order.
    pub const LABELED: [Category; 4] = [
        Category::Exchange,
        Category::Service,
        Category::Gambling,
        Category::MiningPool,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Exchange => "Exchange",
            Category::Service => "Service",
            Category::Gambling => "Gambling",
            Category::MiningPool => "MiningPool",
            Category::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Exchange" => Ok(Category::Exchange),
            "Service" => Ok(Category::Service),
            "Gambling" => Ok(Category::Gambling),
            "MiningPool" => Ok(Category::MiningPool),
            "Unknown" => Ok(Category::Unknown),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInput {
    pub address: AddressId,
    pub utxos: Vec<(UtxoId, u64)>,
}

impl TxInput {
    pub fn value(&self) -> u64 {
        self.utxos.iter().map(|(_, v)| v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutput {
    pub address: AddressId,
    /// First appearance of the address on chain.
    pub is_new: bool,
    /// Paid to an address outside the modeled subset; never enters the ledger.
    pub external: bool,
    pub values: Vec<u64>,
}

impl TxOutput {
    pub fn value(&self) -> u64 {
        self.values.iter().sum()
    }
}

/// One fully realized transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub tx_id: TxId,
    pub block_height: u64,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub fee: u64,
    pub value: u64,
    pub is_coinbase: bool,
    pub is_boundary_in: bool,
    pub input_entity: Option<EntityId>,
}

impl TransactionRecord {
    /// Builds a record, deriving `value` and the boundary flag from the parts.
    ///
    /// For transactions with inputs the value is the consumed input total; for
    /// inputless (coinbase or boundary-in) transactions it is the minted total.
    pub fn new(
        tx_id: TxId,
        block_height: u64,
        inputs: Vec<TxInput>,
        outputs: Vec<TxOutput>,
        fee: u64,
        is_coinbase: bool,
    ) -> Self {
        let is_boundary_in = inputs.is_empty() && !is_coinbase;
        let value = if inputs.is_empty() {
            outputs.iter().map(TxOutput::value).sum::<u64>() + fee
        } else {
            inputs.iter().map(TxInput::value).sum()
        };
        Self {
            tx_id,
            block_height,
            inputs,
            outputs,
            fee,
            value,
            is_coinbase,
            is_boundary_in,
            input_entity: None,
        }
    }

    /// Neither coinbase nor boundary-in: the transactions the block model describes.
    pub fn is_ordinary(&self) -> bool {
        !self.is_coinbase && !self.is_boundary_in
    }

    pub fn input_value(&self) -> u64 {
        self.inputs.iter().map(TxInput::value).sum()
    }

    pub fn output_value(&self) -> u64 {
        self.outputs.iter().map(TxOutput::value).sum()
    }

    /// Outputs that stay inside the modeled subset.
    pub fn internal_outputs(&self) -> impl Iterator<Item = &TxOutput> {
        self.outputs.iter().filter(|o| !o.external)
    }

    pub fn input_addresses(&self) -> impl Iterator<Item = AddressId> + '_ {
        self.inputs.iter().map(|i| i.address)
    }

    /// Iterates `(utxo id, address, value, external)` for every created output.
    pub fn created_utxos(&self) -> impl Iterator<Item = (UtxoId, AddressId, u64, bool)> + '_ {
        let tx = self.tx_id;
        self.outputs
            .iter()
            .flat_map(|o| o.values.iter().map(move |v| (o.address, *v, o.external)))
            .enumerate()
            .map(move |(i, (a, v, ext))| (UtxoId::new(tx, i as u32), a, v, ext))
    }

    /// Σ outputs + fee = Σ inputs for transactions with inputs.
    pub fn is_conserving(&self) -> bool {
        if self.inputs.is_empty() {
            self.fee == 0 && self.value == self.output_value()
        } else {
            let inputs = self.input_value();
            self.value == inputs && self.output_value().checked_add(self.fee) == Some(inputs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub timestamp: u64,
    pub transactions: Vec<TransactionRecord>,
}

impl Block {
    pub fn ordinary_count(&self) -> usize {
        self.transactions.iter().filter(|t| t.is_ordinary()).count()
    }
}
