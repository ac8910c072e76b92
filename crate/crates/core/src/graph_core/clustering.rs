//! Multi-input heuristic: every input address set of a transaction is merged
//! into one cluster, closed transitively.

use std::collections::{BTreeMap, HashMap};

use super::types::{AddressId, TransactionRecord};

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Adds a singleton set and returns its element index.
    pub fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.size.push(1);
        self.parent.len() - 1
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the surviving root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        ra
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// A partition of addresses into clusters in canonical form: members sorted,
/// clusters ordered by their smallest member.
pub type Partition = Vec<Vec<AddressId>>;

/// Incremental multi-input clustering over an address namespace.
#[derive(Debug, Clone, Default)]
pub struct AddressClustering {
    uf: UnionFind,
    ids: HashMap<AddressId, usize>,
    addresses: Vec<AddressId>,
}

impl AddressClustering {
    pub fn new() -> Self {
        Self::default()
    }

    fn element(&mut self, address: AddressId) -> usize {
        if let Some(&e) = self.ids.get(&address) {
            return e;
        }
        let e = self.uf.push();
        self.ids.insert(address, e);
        self.addresses.push(address);
        e
    }

    /// Registers an address as a singleton if unseen.
    pub fn add_address(&mut self, address: AddressId) {
        self.element(address);
    }

    /// Unions all addresses of the given input set.
    pub fn link<I: IntoIterator<Item = AddressId>>(&mut self, addresses: I) {
        let mut first = None;
        for a in addresses {
            let e = self.element(a);
            match first {
                None => first = Some(e),
                Some(f) => {
                    self.uf.union(f, e);
                }
            }
        }
    }

    /// Unions the inputs of `tx` and registers its internal outputs as singletons.
    pub fn observe(&mut self, tx: &TransactionRecord) {
        self.link(tx.input_addresses());
        for o in tx.internal_outputs() {
            self.add_address(o.address);
        }
    }

    pub fn same_cluster(&mut self, a: AddressId, b: AddressId) -> bool {
        match (self.ids.get(&a).copied(), self.ids.get(&b).copied()) {
            (Some(x), Some(y)) => self.uf.same(x, y),
            _ => a == b,
        }
    }

    pub fn cluster_size(&mut self, a: AddressId) -> usize {
        match self.ids.get(&a).copied() {
            Some(e) => self.uf.set_size(e),
            None => 0,
        }
    }

    pub fn partition(&mut self) -> Partition {
        let mut groups: BTreeMap<usize, Vec<AddressId>> = BTreeMap::new();
        for i in 0..self.addresses.len() {
            let root = self.uf.find(i);
            groups.entry(root).or_default().push(self.addresses[i]);
        }
        canonical(groups.into_values().collect())
    }
}

/// Sorts members and clusters into canonical order.
pub fn canonical(mut partition: Partition) -> Partition {
    for class in &mut partition {
        class.sort_unstable();
    }
    partition.sort_unstable_by_key(|c| c[0]);
    partition
}

/// Clusters a transaction stream with the multi-input heuristic.
pub fn cluster_multi_input<'a, I>(txs: I) -> Partition
where
    I: IntoIterator<Item = &'a TransactionRecord>,
{
    let mut clustering = AddressClustering::new();
    for tx in txs {
        clustering.observe(tx);
    }
    clustering.partition()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::types::{TxId, TxInput, UtxoId};

    fn tx_with_inputs(id: u64, inputs: &[u64]) -> TransactionRecord {
        let inputs = inputs
            .iter()
            .map(|&a| TxInput {
                address: AddressId(a),
                utxos: vec![(UtxoId::new(TxId(0), a as u32), 1)],
            })
            .collect();
        TransactionRecord::new(TxId(id), 0, inputs, vec![], 0, false)
    }

    fn ids(v: &[u64]) -> Vec<AddressId> {
        v.iter().copied().map(AddressId).collect()
    }

    #[test]
    fn transitive_closure() {
        let txs = [tx_with_inputs(1, &[1, 2]), tx_with_inputs(2, &[2, 3])];
        assert_eq!(cluster_multi_input(&txs), vec![ids(&[1, 2, 3])]);
    }

    #[test]
    fn no_co_occurrence() {
        let txs = [tx_with_inputs(1, &[1]), tx_with_inputs(2, &[2])];
        assert_eq!(cluster_multi_input(&txs), vec![ids(&[1]), ids(&[2])]);
    }

    #[test]
    fn union_find_sizes() {
        let mut uf = UnionFind::new(5);
        uf.union(0, 1);
        uf.union(3, 4);
        uf.union(1, 4);
        assert_eq!(uf.set_size(0), 4);
        assert!(!uf.same(2, 0));
    }
}
