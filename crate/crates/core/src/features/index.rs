use std::collections::{BTreeMap, HashMap};

use super::FeatureError;
use crate::graph_core::{cluster_multi_input, AddressId, Block, Category, EntityId, UtxoId};
use crate::io::LabelTable;

/// Entities that receive a feature row, and address ownership.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntitySet {
    pub ids: Vec<EntityId>,
    pub labels: Vec<Category>,
    owner: HashMap<AddressId, usize>,
}

impl EntitySet {
    /// Every labeled entity, in id order.
    pub fn from_labels(labels: &LabelTable) -> Self {
        let ids: Vec<EntityId> = labels.entities().keys().copied().collect();
        let labels_v = labels.entities().values().copied().collect();
        let row: HashMap<EntityId, usize> = ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let owner = labels.rows().map(|(a, e, _)| (a, row[&e])).collect();
        Self { ids, labels: labels_v, owner }
    }

    /// Multi-input clusters as entities, numbered in canonical cluster order.
    pub fn from_clustering(blocks: &[Block]) -> Self {
        let clusters = cluster_multi_input(blocks.iter().flat_map(|b| &b.transactions));
        let mut set = Self::default();
        for (i, class) in clusters.into_iter().enumerate() {
            set.ids.push(EntityId(i as u32));
            set.labels.push(Category::Unknown);
            set.owner.extend(class.into_iter().map(|a| (a, i)));
        }
        set
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row_of(&self, address: AddressId) -> Option<usize> {
        self.owner.get(&address).copied()
    }
}

/// UTXOs created by one transaction for one entity and spent together by a
/// later transaction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Link {
    pub next: usize,
    pub entity: usize,
    pub value: u64,
    pub n_addresses: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TxView {
    pub height: u64,
    pub timestamp: u64,
    pub coinbase: bool,
    pub fee: u64,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Distinct owning entities of the inputs with the value each contributes.
    pub senders: Vec<(usize, u64)>,
    /// Distinct owning entities of internal outputs with the value each receives.
    pub receivers: Vec<(usize, u64)>,
    pub links: Vec<Link>,
}

/// One pass over the stream resolving ownership and UTXO spends.
#[derive(Debug, Clone)]
pub(crate) struct StreamIndex {
    pub txs: Vec<TxView>,
    pub min_height: u64,
    pub max_height: u64,
}

fn grouped(items: impl Iterator<Item = (usize, u64)>) -> Vec<(usize, u64)> {
    let mut m: BTreeMap<usize, u64> = BTreeMap::new();
    for (e, v) in items {
        *m.entry(e).or_default() += v;
    }
    m.into_iter().collect()
}

impl StreamIndex {
    pub fn build(blocks: &[Block], entities: &EntitySet) -> Result<Self, FeatureError> {
        let mut txs = Vec::new();
        let mut created: HashMap<UtxoId, (usize, AddressId, u64)> = HashMap::new();
        // (creator, next, entity) -> (value, addresses)
        let mut links: BTreeMap<(usize, usize, usize), (u64, Vec<AddressId>)> = BTreeMap::new();
        for b in blocks {
            for t in &b.transactions {
                let pos = txs.len();
                for input in &t.inputs {
                    for (u, _) in &input.utxos {
                        let Some((creator, addr, value)) = created.remove(u) else {
                            return Err(FeatureError::UnknownUtxo(*u));
                        };
                        if let Some(e) = entities.row_of(addr) {
                            let slot = links.entry((creator, pos, e)).or_default();
                            slot.0 += value;
                            if !slot.1.contains(&addr) {
                                slot.1.push(addr);
                            }
                        }
                    }
                }
                for (u, addr, value, external) in t.created_utxos() {
                    if !external {
                        created.insert(u, (pos, addr, value));
                    }
                }
                let senders = grouped(
                    t.inputs.iter().filter_map(|i| entities.row_of(i.address).map(|e| (e, i.value()))),
                );
                let receivers = grouped(
                    t.internal_outputs().filter_map(|o| entities.row_of(o.address).map(|e| (e, o.value()))),
                );
                txs.push(TxView {
                    height: b.height,
                    timestamp: b.timestamp,
                    coinbase: t.is_coinbase,
                    fee: t.fee,
                    n_inputs: t.inputs.len(),
                    n_outputs: t.outputs.len(),
                    senders,
                    receivers,
                    links: Vec::new(),
                });
            }
        }
        for ((creator, next, entity), (value, addrs)) in links {
            txs[creator].links.push(Link { next, entity, value, n_addresses: addrs.len() });
        }
        let min_height = blocks.first().map_or(0, |b| b.height);
        let max_height = blocks.last().map_or(0, |b| b.height);
        Ok(Self { txs, min_height, max_height })
    }
}
