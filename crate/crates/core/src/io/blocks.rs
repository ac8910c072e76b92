use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::graph_core::{AddressId, Block, Ledger, TransactionRecord, TxId, TxInput, TxOutput, UtxoId};

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBlock {
    height: u64,
    timestamp: u64,
    txs: Vec<WireTx>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTx {
    id: u64,
    coinbase: bool,
    inputs: Vec<WireInput>,
    outputs: Vec<WireOutput>,
    fee_sat: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireInput {
    addr: u64,
    utxos: Vec<WireUtxo>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireUtxo {
    id: UtxoId,
    value_sat: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireOutput {
    addr: u64,
    new: bool,
    values_sat: Vec<u64>,
    /// Paid outside the modeled subset. Omitted when false.
    #[serde(default, skip_serializing_if = "is_false")]
    external: bool,
}

impl From<&Block> for WireBlock {
    fn from(b: &Block) -> Self {
        WireBlock {
            height: b.height,
            timestamp: b.timestamp,
            txs: b
                .transactions
                .iter()
                .map(|t| WireTx {
                    id: t.tx_id.0,
                    coinbase: t.is_coinbase,
                    inputs: t
                        .inputs
                        .iter()
                        .map(|i| WireInput {
                            addr: i.address.0,
                            utxos: i.utxos.iter().map(|&(id, value_sat)| WireUtxo { id, value_sat }).collect(),
                        })
                        .collect(),
                    outputs: t
                        .outputs
                        .iter()
                        .map(|o| WireOutput {
                            addr: o.address.0,
                            new: o.is_new,
                            values_sat: o.values.clone(),
                            external: o.external,
                        })
                        .collect(),
                    fee_sat: t.fee,
                })
                .collect(),
        }
    }
}

impl WireBlock {
    fn into_block(self) -> Block {
        let height = self.height;
        let transactions = self
            .txs
            .into_iter()
            .map(|t| {
                let inputs = t
                    .inputs
                    .into_iter()
                    .map(|i| TxInput {
                        address: AddressId(i.addr),
                        utxos: i.utxos.into_iter().map(|u| (u.id, u.value_sat)).collect(),
                    })
                    .collect();
                let outputs = t
                    .outputs
                    .into_iter()
                    .map(|o| TxOutput {
                        address: AddressId(o.addr),
                        is_new: o.new,
                        external: o.external,
                        values: o.values_sat,
                    })
                    .collect();
                TransactionRecord::new(TxId(t.id), height, inputs, outputs, t.fee_sat, t.coinbase)
            })
            .collect();
        Block { height, timestamp: self.timestamp, transactions }
    }
}

/// Serializes one block as a single JSON line (no trailing newline).
pub fn block_to_line(block: &Block) -> String {
    serde_json::to_string(&WireBlock::from(block)).expect("wire block serializes")
}

pub fn write_blocks<W: Write>(mut w: W, blocks: &[Block]) -> std::io::Result<()> {
    for b in blocks {
        writeln!(w, "{}", block_to_line(b))?;
    }
    Ok(())
}

/// Streaming reader that validates every block against the ledger rules as it
/// is parsed.
pub struct BlockReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    ledger: Ledger,
    last: Option<(u64, u64)>,
}

impl<R: BufRead> BlockReader<R> {
    pub fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line_no: 0, ledger: Ledger::new(), last: None }
    }

    /// Ledger state after every block read so far.
    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn parse_line(&mut self, text: &str) -> Result<Block, IoError> {
        let line = self.line_no;
        let de = &mut serde_json::Deserializer::from_str(text);
        let wire: WireBlock = serde_path_to_error::deserialize(de).map_err(|e| IoError::Malformed {
            line,
            key: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let block = wire.into_block();
        if let Some((height, timestamp)) = self.last {
            if block.height != height + 1 {
                return Err(IoError::Height { line, previous: height, found: block.height });
            }
            if block.timestamp < timestamp {
                return Err(IoError::Timestamp { line, height: block.height });
            }
        }
        self.last = Some((block.height, block.timestamp));
        for tx in &block.transactions {
            self.ledger
                .apply_transaction(tx)
                .map_err(|source| IoError::Invalid { line, tx: tx.tx_id, source })?;
        }
        Ok(block)
    }
}

impl<R: BufRead> Iterator for BlockReader<R> {
    type Item = Result<Block, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(IoError::Read(e))),
            };
            self.line_no += 1;
            if text.trim().is_empty() {
                continue;
            }
            return Some(self.parse_line(&text));
        }
    }
}

pub fn open_blocks(path: &Path) -> Result<BlockReader<BufReader<File>>, IoError> {
    let file = File::open(path).map_err(|e| IoError::Open { path: path.display().to_string(), source: e })?;
    Ok(BlockReader::new(BufReader::new(file)))
}

pub fn parse_blocks(path: &Path) -> Result<Vec<Block>, IoError> {
    open_blocks(path)?.collect()
}

pub fn parse_blocks_str(text: &str) -> Result<Vec<Block>, IoError> {
    BlockReader::new(text.as_bytes()).collect()
}
