use std::collections::{BTreeMap, BTreeSet, VecDeque};

use btmodel::graph_core::{canonical, AddressId, Partition, TransactionRecord, TxId, TxInput, TxOutput, UtxoId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid trace over a small address pool, tracked with plain maps.
pub struct Trace {
    pub txs: Vec<TransactionRecord>,
    // address -> unspent (utxo, value), in creation order
    pub held: BTreeMap<u64, Vec<(UtxoId, u64)>>,
    next_addr: u64,
}

impl Trace {
    pub fn generate(n_txs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Trace { txs: Vec::new(), held: BTreeMap::new(), next_addr: 0 };
        for id in 0..n_txs as u64 {
            let funded: Vec<u64> = t.held.iter().filter(|(_, u)| !u.is_empty()).map(|(&a, _)| a).collect();
            let tx = if funded.is_empty() || rng.random_bool(0.1) {
                let a = t.fresh();
                let v = rng.random_range(1_000..100_000);
                TransactionRecord::new(
                    TxId(id),
                    0,
                    vec![],
                    vec![TxOutput { address: AddressId(a), is_new: true, external: false, values: vec![v] }],
                    0,
                    id % 7 == 0,
                )
            } else {
                let k = rng.random_range(1..=funded.len().min(3));
                let picked: Vec<u64> = funded.choose_multiple(&mut rng, k).copied().collect();
                let mut inputs = Vec::new();
                for a in picked {
                    let utxos = t.held.get_mut(&a).unwrap();
                    let take = rng.random_range(1..=utxos.len());
                    inputs.push(TxInput { address: AddressId(a), utxos: utxos.drain(..take).collect() });
                }
                let total: u64 = inputs.iter().map(|i| i.value()).sum();
                let fee = rng.random_range(0..=total / 10);
                let mut remaining = total - fee;
                let n_out = rng.random_range(1..=3usize).min(remaining as usize);
                let mut outputs = Vec::new();
                for j in 0..n_out {
                    let v = if j + 1 == n_out { remaining } else { rng.random_range(1..=remaining - (n_out - j - 1) as u64) };
                    remaining -= v;
                    let external = rng.random_bool(0.1);
                    let (addr, is_new) = if external {
                        (1_000_000 + id, false)
                    } else if rng.random_bool(0.5) || t.held.is_empty() {
                        let a = t.fresh();
                        (a, true)
                    } else {
                        let known: Vec<u64> = t.held.keys().copied().collect();
                        (*known.choose(&mut rng).unwrap(), false)
                    };
                    outputs.push(TxOutput { address: AddressId(addr), is_new, external, values: vec![v] });
                }
                TransactionRecord::new(TxId(id), 0, inputs, outputs, fee, false)
            };
            for (utxo, addr, v, external) in tx.created_utxos() {
                if !external {
                    t.held.entry(addr.0).or_default().push((utxo, v));
                }
            }
            t.txs.push(tx);
        }
        t
    }

    fn fresh(&mut self) -> u64 {
        self.next_addr += 1;
        self.held.insert(self.next_addr, Vec::new());
        self.next_addr
    }
}

/// Connected components of the address graph joined by co-spending, by BFS.
pub fn bfs_components(txs: &[TransactionRecord]) -> Partition {
    let mut adj: BTreeMap<AddressId, BTreeSet<AddressId>> = BTreeMap::new();
    for tx in txs {
        let ins: Vec<_> = tx.input_addresses().collect();
        for &a in &ins {
            let e = adj.entry(a).or_default();
            e.extend(ins.iter().copied().filter(|&b| b != a));
        }
        for o in tx.internal_outputs() {
            adj.entry(o.address).or_default();
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[&a] {
                if seen.insert(b) {
                    comp.push(b);
                    queue.push_back(b);
                }
            }
        }
        out.push(comp);
    }
    canonical(out)
}
