use std::collections::BTreeSet;

use super::AliasPartition;
use crate::graph_core::{AddressClustering, AddressId};

/// What the attacker has linked so far, starting from one known alias.
#[derive(Debug, Clone)]
pub struct AttackerKnowledge {
    clustering: AddressClustering,
    seed: Vec<AddressId>,
}

impl AttackerKnowledge {
    /// Knows only that the seed addresses belong together.
    pub fn new(seed: Vec<AddressId>) -> Self {
        let mut clustering = AddressClustering::new();
        clustering.link(seed.iter().copied());
        Self { clustering, seed }
    }

    /// Seed is alias 0; every other alias is already seen as one cluster,
    /// so any contact with it links the whole alias.
    pub fn from_partition(p: &AliasPartition) -> Self {
        let mut k = Self::new(p.aliases[0].clone());
        for alias in &p.aliases[1..] {
            k.clustering.link(alias.iter().copied());
        }
        k
    }

    pub fn seed(&self) -> &[AddressId] {
        &self.seed
    }

    pub fn observe<I: IntoIterator<Item = AddressId>>(&mut self, inputs: I) {
        self.clustering.link(inputs);
    }

    /// Addresses linked to the seed class, excluding the seed itself.
    pub fn discovered(&mut self) -> BTreeSet<AddressId> {
        let Some(&anchor) = self.seed.first() else {
            return BTreeSet::new();
        };
        let seed: BTreeSet<_> = self.seed.iter().copied().collect();
        self.clustering
            .partition()
            .into_iter()
            .find(|class| class.binary_search(&anchor).is_ok())
            .unwrap_or_default()
            .into_iter()
            .filter(|a| !seed.contains(a))
            .collect()
    }

    pub fn discovered_count(&mut self) -> usize {
        match self.seed.first() {
            Some(&anchor) => self.clustering.cluster_size(anchor) - self.seed.len(),
            None => 0,
        }
    }
}

pub fn attacker_observe(knowledge: &mut AttackerKnowledge, tx_input_addresses: &[AddressId]) {
    knowledge.observe(tx_input_addresses.iter().copied());
}
