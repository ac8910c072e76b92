use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::BlockError;
use crate::distributions::DynamicWeights;
use crate::graph_core::{
    AddressId, Category, EntityId, Ledger, LedgerDelta, TransactionRecord, TxId,
};

/// Where an address draw is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    Entity(usize),
}

#[derive(Debug, Clone)]
struct EntityIndex {
    id: EntityId,
    category: Category,
    /// Ledger slots of member addresses, in order of assignment.
    slots: Vec<usize>,
    utxo_w: DynamicWeights,
    out_w: DynamicWeights,
    funded: usize,
}

/// A sampled transaction plus ownership of the fresh addresses it creates.
#[derive(Debug, Clone)]
pub struct Draft {
    pub tx: TransactionRecord,
    pub owners: Vec<(AddressId, EntityId)>,
}

/// Ledger plus the attachment weights kept in sync with it.
///
/// Input weights are `k_utxo + 1` for funded addresses and 0 otherwise;
/// output weights are `k_out + 1`. Entity-level weights follow the entity
/// aggregates.
#[derive(Debug, Clone, Default)]
pub struct ChainState {
    ledger: Ledger,
    next_tx: u64,
    next_address: u64,
    utxo_w: DynamicWeights,
    out_w: DynamicWeights,
    funded: usize,
    /// Per ledger slot: (entity index, position within the entity).
    member: Vec<Option<(usize, usize)>>,
    entities: Vec<EntityIndex>,
    entity_pos: HashMap<EntityId, usize>,
    entity_out_w: DynamicWeights,
    /// Per category: entity indices and their `k_e^UTXO + 1` weights.
    by_category: BTreeMap<Category, (Vec<usize>, DynamicWeights)>,
    category_pos: Vec<usize>,
}

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    pub fn next_tx_id(&mut self) -> TxId {
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        id
    }

    pub fn fresh_address(&mut self) -> AddressId {
        let a = AddressId(self.next_address);
        self.next_address += 1;
        a
    }

    pub fn register_entity(&mut self, id: EntityId, category: Category) -> usize {
        if let Some(&e) = self.entity_pos.get(&id) {
            return e;
        }
        self.ledger.register_entity(id, category);
        let e = self.entities.len();
        self.entities.push(EntityIndex {
            id,
            category,
            slots: Vec::new(),
            utxo_w: DynamicWeights::new(),
            out_w: DynamicWeights::new(),
            funded: 0,
        });
        self.entity_pos.insert(id, e);
        self.entity_out_w.push(1);
        let (members, weights) = self.by_category.entry(category).or_default();
        self.category_pos.push(members.len());
        members.push(e);
        weights.push(1);
        e
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity_id(&self, e: usize) -> EntityId {
        self.entities[e].id
    }

    pub fn entity_category(&self, e: usize) -> Category {
        self.entities[e].category
    }

    pub fn entity_index(&self, id: EntityId) -> Option<usize> {
        self.entity_pos.get(&id).copied()
    }

    pub fn entities_in(&self, category: Category) -> &[usize] {
        self.by_category.get(&category).map(|(m, _)| m.as_slice()).unwrap_or(&[])
    }

    /// Number of addresses holding at least one UTXO within the scope.
    pub fn funded(&self, scope: Scope) -> usize {
        match scope {
            Scope::Global => self.funded,
            Scope::Entity(e) => self.entities[e].funded,
        }
    }

    pub fn scope_size(&self, scope: Scope) -> usize {
        match scope {
            Scope::Global => self.ledger.address_count(),
            Scope::Entity(e) => self.entities[e].slots.len(),
        }
    }

    fn slot_in(&self, scope: Scope, local: usize) -> usize {
        match scope {
            Scope::Global => local,
            Scope::Entity(e) => self.entities[e].slots[local],
        }
    }

    fn trees(&mut self, scope: Scope) -> (&mut DynamicWeights, &mut DynamicWeights) {
        match scope {
            Scope::Global => (&mut self.utxo_w, &mut self.out_w),
            Scope::Entity(e) => {
                let ent = &mut self.entities[e];
                (&mut ent.utxo_w, &mut ent.out_w)
            }
        }
    }

    /// Draws `n` distinct funded addresses ∝ `k_utxo + 1`; returns ledger slots.
    pub fn take_inputs<R: Rng + ?Sized>(&mut self, scope: Scope, n: usize, rng: &mut R) -> Option<Vec<usize>> {
        if self.funded(scope) < n {
            return None;
        }
        let mut taken = Vec::with_capacity(n);
        for _ in 0..n {
            let (tree, _) = self.trees(scope);
            let local = tree.sample(rng).expect("funded count checked");
            let w = tree.get(local);
            tree.set(local, 0);
            taken.push((local, w));
        }
        let (tree, _) = self.trees(scope);
        for &(local, w) in &taken {
            tree.set(local, w);
        }
        Some(taken.into_iter().map(|(l, _)| self.slot_in(scope, l)).collect())
    }

    /// Draws one address ∝ `k_out + 1`, skipping slots already in `exclude`.
    pub fn pick_output<R: Rng + ?Sized>(
        &mut self,
        scope: Scope,
        exclude: &[usize],
        rng: &mut R,
    ) -> Option<usize> {
        let locals: Vec<usize> = exclude.iter().filter_map(|&slot| self.local_of(scope, slot)).collect();
        let (_, tree) = self.trees(scope);
        let locals: Vec<(usize, u64)> = locals
            .into_iter()
            .map(|l| {
                let w = tree.get(l);
                tree.set(l, 0);
                (l, w)
            })
            .collect();
        let (_, tree) = self.trees(scope);
        let picked = tree.sample(rng);
        for &(l, w) in &locals {
            tree.set(l, w);
        }
        picked.map(|l| self.slot_in(scope, l))
    }

    fn local_of(&self, scope: Scope, slot: usize) -> Option<usize> {
        match scope {
            Scope::Global => Some(slot),
            Scope::Entity(e) => match self.member.get(slot).copied().flatten() {
                Some((owner, local)) if owner == e => Some(local),
                _ => None,
            },
        }
    }

    /// Draws an entity of `category` ∝ `k_e^UTXO + 1`.
    pub fn pick_input_entity<R: Rng + ?Sized>(&self, category: Category, rng: &mut R) -> Option<usize> {
        let (members, weights) = self.by_category.get(&category)?;
        weights.sample(rng).map(|i| members[i])
    }

    /// Draws an entity ∝ `k_e^out + 1`, optionally within one category.
    pub fn pick_output_entity<R: Rng + ?Sized>(&self, category: Option<Category>, rng: &mut R) -> Option<usize> {
        match category {
            None => self.entity_out_w.sample(rng),
            Some(c) => {
                let members = self.entities_in(c);
                if members.is_empty() {
                    return None;
                }
                let total: u64 = members.iter().map(|&e| self.entity_out_w.get(e)).sum();
                let mut r = rng.random_range(0..total);
                for &e in members {
                    let w = self.entity_out_w.get(e);
                    if r < w {
                        return Some(e);
                    }
                    r -= w;
                }
                unreachable!("r < total")
            }
        }
    }

    /// Applies a draft to the ledger, records fresh-address ownership and
    /// refreshes every affected weight.
    pub fn commit(&mut self, draft: &Draft) -> Result<LedgerDelta, BlockError> {
        let delta = self.ledger.apply_transaction(&draft.tx)?;
        for &(address, entity) in &draft.owners {
            self.ledger.assign_owner(address, entity)?;
        }
        for &address in &delta.new_addresses {
            let slot = self.ledger.slot_of(address).expect("just created");
            debug_assert_eq!(slot, self.utxo_w.len());
            self.utxo_w.push(0);
            self.out_w.push(1);
            self.member.push(None);
        }
        for &(address, entity) in &draft.owners {
            let slot = self.ledger.slot_of(address).expect("owned address exists");
            if self.member[slot].is_some() {
                continue;
            }
            let e = *self
                .entity_pos
                .get(&entity)
                .ok_or(BlockError::InvalidParams(format!("entity {entity} not registered")))?;
            let ent = &mut self.entities[e];
            let local = ent.slots.len();
            ent.slots.push(slot);
            ent.utxo_w.push(0);
            ent.out_w.push(1);
            self.member[slot] = Some((e, local));
        }
        let mut touched_entities = Vec::new();
        let owned = draft.owners.iter().map(|(a, _)| *a);
        for address in delta.touched.iter().copied().chain(owned) {
            let slot = self.ledger.slot_of(address).expect("touched address exists");
            if let Some(e) = self.refresh(slot) {
                touched_entities.push(e);
            }
        }
        touched_entities.sort_unstable();
        touched_entities.dedup();
        for e in touched_entities {
            let record = self.ledger.entity(self.entities[e].id).expect("registered");
            let (k_utxo, k_out) = (record.k_utxo_entity, record.k_out_entity);
            self.entity_out_w.set(e, k_out + 1);
            let (_, weights) = self.by_category.get_mut(&self.entities[e].category).expect("registered");
            weights.set(self.category_pos[e], k_utxo + 1);
        }
        Ok(delta)
    }

    fn refresh(&mut self, slot: usize) -> Option<usize> {
        let state = self.ledger.slot(slot);
        let k_utxo = state.k_utxo();
        let uw = if k_utxo > 0 { k_utxo + 1 } else { 0 };
        let ow = state.k_out + 1;
        let was = self.utxo_w.get(slot) > 0;
        self.funded = self.funded + (uw > 0) as usize - was as usize;
        self.utxo_w.set(slot, uw);
        self.out_w.set(slot, ow);
        let (e, local) = self.member[slot]?;
        let ent = &mut self.entities[e];
        let was = ent.utxo_w.get(local) > 0;
        ent.funded = ent.funded + (uw > 0) as usize - was as usize;
        ent.utxo_w.set(local, uw);
        ent.out_w.set(local, ow);
        Some(e)
    }

    /// Ground-truth labels of every owned address, sorted by address.
    pub fn labels(&self) -> Vec<(AddressId, EntityId, Category)> {
        let mut rows: Vec<_> = self
            .entities
            .iter()
            .flat_map(|ent| {
                ent.slots
                    .iter()
                    .map(move |&s| (self.ledger.slot(s).address_id, ent.id, ent.category))
            })
            .collect();
        rows.sort_unstable();
        rows
    }
}
