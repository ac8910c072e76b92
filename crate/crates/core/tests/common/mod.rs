#![allow(dead_code, unused_imports)]

mod motifs;
mod trace;

pub use motifs::{brute_force_motifs, feature_counts, Counts};
pub use trace::{bfs_components, Trace};

use btmodel::graph_core::{AddressId, Block, TransactionRecord, TxId, TxInput, TxOutput, UtxoId};

/// Builds hand-written block streams with consistent tx ids.
#[derive(Default)]
pub struct StreamBuilder {
    pub blocks: Vec<Block>,
    next_tx: u64,
}

impl StreamBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(&mut self) -> &mut Self {
        let height = self.blocks.len() as u64;
        self.blocks.push(Block { height, timestamp: 1_600_000_000 + 600 * height, transactions: vec![] });
        self
    }

    fn push(&mut self, inputs: Vec<TxInput>, outputs: Vec<TxOutput>, fee: u64, coinbase: bool) -> TxId {
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        let b = self.blocks.last_mut().expect("call block() first");
        b.transactions.push(TransactionRecord::new(id, b.height, inputs, outputs, fee, coinbase));
        id
    }

    /// Inputless transaction paying `values[i]` to `addresses[i]` (all fresh).
    pub fn mint(&mut self, outputs: &[(u64, u64)], coinbase: bool) -> TxId {
        let outs = outputs
            .iter()
            .map(|&(a, v)| TxOutput { address: AddressId(a), is_new: true, external: false, values: vec![v] })
            .collect();
        self.push(vec![], outs, 0, coinbase)
    }

    /// Spends the given `(utxo, owner, value)` entries; outputs are `(address, new, value)`.
    pub fn spend(&mut self, inputs: &[(UtxoId, u64, u64)], outputs: &[(u64, bool, u64)], fee: u64) -> TxId {
        let mut ins: Vec<TxInput> = Vec::new();
        for &(u, a, v) in inputs {
            match ins.iter_mut().find(|i| i.address == AddressId(a)) {
                Some(i) => i.utxos.push((u, v)),
                None => ins.push(TxInput { address: AddressId(a), utxos: vec![(u, v)] }),
            }
        }
        let outs = outputs
            .iter()
            .map(|&(a, new, v)| TxOutput { address: AddressId(a), is_new: new, external: false, values: vec![v] })
            .collect();
        self.push(ins, outs, fee, false)
    }
}

pub fn utxo(tx: TxId, index: u32) -> UtxoId {
    UtxoId::new(tx, index)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
