//! Bipartite address–transaction state: unspent outputs per address,
//! cumulative out-degrees and the ground-truth entity ownership table.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use thiserror::Error;

use super::types::{AddressId, Category, EntityId, TransactionRecord, TxId, UtxoId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("tx {tx}: utxo {utxo} was already spent")]
    DoubleSpend { tx: TxId, utxo: UtxoId },
    #[error("tx {tx}: utxo {utxo} does not exist")]
    UnknownUtxo { tx: TxId, utxo: UtxoId },
    #[error("tx {tx}: utxo {utxo} is not held by address {address}")]
    WrongOwner { tx: TxId, utxo: UtxoId, address: AddressId },
    #[error("tx {tx}: utxo {utxo} value {claimed} does not match ledger value {actual}")]
    ValueMismatch { tx: TxId, utxo: UtxoId, claimed: u64, actual: u64 },
    #[error("tx {tx}: outputs + fee do not equal inputs")]
    Conservation { tx: TxId },
    #[error("tx {tx}: zero-valued output")]
    ZeroValue { tx: TxId },
    #[error("tx {tx}: address {address} appears twice as input")]
    DuplicateInput { tx: TxId, address: AddressId },
    #[error("tx {tx}: address {address} is flagged new={flagged} but was{} seen before", if *.flagged { "" } else { " not" })]
    Freshness { tx: TxId, address: AddressId, flagged: bool },
    #[error("tx {tx}: input {address} without consumed utxos")]
    EmptyInput { tx: TxId, address: AddressId },
    #[error("address {address} is already owned by entity {owner}")]
    OwnershipConflict { address: AddressId, owner: EntityId },
    #[error("unknown address {0}")]
    UnknownAddress(AddressId),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressState {
    pub address_id: AddressId,
    /// Unspent outputs in arrival order (swap-removed on spend).
    pub utxos: IndexMap<UtxoId, u64>,
    /// Cumulative number of spent outputs.
    pub k_out: u64,
    pub owner: Option<EntityId>,
}

impl AddressState {
    fn new(address_id: AddressId) -> Self {
        Self {
            address_id,
            utxos: IndexMap::new(),
            k_out: 0,
            owner: None,
        }
    }

    pub fn k_utxo(&self) -> u64 {
        self.utxos.len() as u64
    }

    pub fn balance(&self) -> u64 {
        self.utxos.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub entity_id: EntityId,
    pub category: Category,
    pub addresses: BTreeSet<AddressId>,
    pub k_utxo_entity: u64,
    pub k_out_entity: u64,
}

/// Running value accounts; all in satoshi.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValueAccounts {
    /// Created by inputless (coinbase and boundary-in) transactions.
    pub minted: u64,
    pub fees: u64,
    pub external_out: u64,
    pub unspent_value: u64,
    pub unspent_count: u64,
}

impl ValueAccounts {
    /// unspent = minted − fees − external outflow.
    pub fn balanced(&self) -> bool {
        self.minted
            .checked_sub(self.fees)
            .and_then(|v| v.checked_sub(self.external_out))
            == Some(self.unspent_value)
    }
}

/// Effects of one applied transaction, in application order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerDelta {
    pub consumed: Vec<(AddressId, UtxoId, u64)>,
    pub created: Vec<(AddressId, UtxoId, u64)>,
    pub new_addresses: Vec<AddressId>,
    /// Every ledger address whose UTXO set or out-degree changed, deduplicated.
    pub touched: Vec<AddressId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DegreeSnapshot {
    pub addresses: Vec<AddressId>,
    pub k_utxo: Vec<u64>,
    pub k_out: Vec<u64>,
    /// `(k_utxo_entity, k_out_entity)` per entity.
    pub entities: BTreeMap<EntityId, (u64, u64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    slots: Vec<AddressState>,
    index: HashMap<AddressId, usize>,
    unspent: HashMap<UtxoId, usize>,
    spent: HashSet<UtxoId>,
    entities: BTreeMap<EntityId, EntityRecord>,
    accounts: ValueAccounts,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accounts(&self) -> ValueAccounts {
        self.accounts
    }

    pub fn address_count(&self) -> usize {
        self.slots.len()
    }

    /// Dense slot of an address; slots are assigned in order of first appearance.
    pub fn slot_of(&self, address: AddressId) -> Option<usize> {
        self.index.get(&address).copied()
    }

    pub fn slot(&self, slot: usize) -> &AddressState {
        &self.slots[slot]
    }

    pub fn address(&self, address: AddressId) -> Option<&AddressState> {
        self.slot_of(address).map(|s| &self.slots[s])
    }

    pub fn contains(&self, address: AddressId) -> bool {
        self.index.contains_key(&address)
    }

    pub fn addresses(&self) -> impl Iterator<Item = &AddressState> {
        self.slots.iter()
    }

    pub fn is_spent(&self, utxo: UtxoId) -> bool {
        self.spent.contains(&utxo)
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, EntityRecord> {
        &self.entities
    }

    pub fn entity(&self, id: EntityId) -> Option<&EntityRecord> {
        self.entities.get(&id)
    }

    pub fn owner_of(&self, address: AddressId) -> Option<EntityId> {
        self.address(address).and_then(|a| a.owner)
    }

    pub fn register_entity(&mut self, entity_id: EntityId, category: Category) {
        self.entities.entry(entity_id).or_insert_with(|| EntityRecord {
            entity_id,
            category,
            addresses: BTreeSet::new(),
            k_utxo_entity: 0,
            k_out_entity: 0,
        });
    }

    /// Records ground-truth ownership of a ledger address.
    pub fn assign_owner(&mut self, address: AddressId, entity: EntityId) -> Result<(), LedgerError> {
        let slot = self.slot_of(address).ok_or(LedgerError::UnknownAddress(address))?;
        if !self.entities.contains_key(&entity) {
            return Err(LedgerError::UnknownEntity(entity));
        }
        let state = &mut self.slots[slot];
        match state.owner {
            Some(owner) if owner == entity => return Ok(()),
            Some(owner) => return Err(LedgerError::OwnershipConflict { address, owner }),
            None => state.owner = Some(entity),
        }
        let (k_utxo, k_out) = (state.k_utxo(), state.k_out);
        let record = self.entities.get_mut(&entity).expect("checked above");
        record.addresses.insert(address);
        record.k_utxo_entity += k_utxo;
        record.k_out_entity += k_out;
        Ok(())
    }

    /// Checks every precondition of `apply_transaction` without mutating.
    pub fn validate(&self, tx: &TransactionRecord) -> Result<(), LedgerError> {
        let id = tx.tx_id;
        if !tx.is_conserving() {
            return Err(LedgerError::Conservation { tx: id });
        }
        if tx.outputs.iter().any(|o| o.values.contains(&0)) {
            return Err(LedgerError::ZeroValue { tx: id });
        }
        let mut seen_inputs = HashSet::new();
        let mut seen_utxos = HashSet::new();
        for input in &tx.inputs {
            if !seen_inputs.insert(input.address) {
                return Err(LedgerError::DuplicateInput { tx: id, address: input.address });
            }
            if input.utxos.is_empty() {
                return Err(LedgerError::EmptyInput { tx: id, address: input.address });
            }
            for &(utxo, claimed) in &input.utxos {
                if !seen_utxos.insert(utxo) || self.spent.contains(&utxo) {
                    return Err(LedgerError::DoubleSpend { tx: id, utxo });
                }
                let slot = *self
                    .unspent
                    .get(&utxo)
                    .ok_or(LedgerError::UnknownUtxo { tx: id, utxo })?;
                let holder = &self.slots[slot];
                if holder.address_id != input.address {
                    return Err(LedgerError::WrongOwner { tx: id, utxo, address: input.address });
                }
                let actual = holder.utxos[&utxo];
                if actual != claimed {
                    return Err(LedgerError::ValueMismatch { tx: id, utxo, claimed, actual });
                }
            }
        }
        let mut fresh = HashSet::new();
        for output in tx.internal_outputs() {
            // A new address may be paid again later in the same tx (flagged not new).
            let valid = if output.is_new {
                !self.contains(output.address) && fresh.insert(output.address)
            } else {
                self.contains(output.address) || fresh.contains(&output.address)
            };
            if !valid {
                return Err(LedgerError::Freshness {
                    tx: id,
                    address: output.address,
                    flagged: output.is_new,
                });
            }
        }
        Ok(())
    }

    /// Applies a transaction: removes consumed UTXOs, credits created ones and
    /// bumps each input address's out-degree by its number of consumed UTXOs.
    pub fn apply_transaction(&mut self, tx: &TransactionRecord) -> Result<LedgerDelta, LedgerError> {
        self.validate(tx)?;
        let mut delta = LedgerDelta::default();
        let mut touched = BTreeSet::new();

        for input in &tx.inputs {
            let slot = self.index[&input.address];
            for &(utxo, value) in &input.utxos {
                self.slots[slot].utxos.swap_remove(&utxo);
                self.unspent.remove(&utxo);
                self.spent.insert(utxo);
                self.accounts.unspent_value -= value;
                self.accounts.unspent_count -= 1;
                delta.consumed.push((input.address, utxo, value));
            }
            let spent = input.utxos.len() as u64;
            let state = &mut self.slots[slot];
            state.k_out += spent;
            if let Some(owner) = state.owner {
                let record = self.entities.get_mut(&owner).expect("owner registered");
                record.k_out_entity += spent;
                record.k_utxo_entity -= spent;
            }
            touched.insert(input.address);
        }

        for (utxo, address, value, external) in tx.created_utxos() {
            if external {
                self.accounts.external_out += value;
                continue;
            }
            let slot = match self.index.get(&address) {
                Some(&s) => s,
                None => {
                    self.slots.push(AddressState::new(address));
                    self.index.insert(address, self.slots.len() - 1);
                    delta.new_addresses.push(address);
                    self.slots.len() - 1
                }
            };
            let state = &mut self.slots[slot];
            state.utxos.insert(utxo, value);
            if let Some(owner) = state.owner {
                self.entities.get_mut(&owner).expect("owner registered").k_utxo_entity += 1;
            }
            self.unspent.insert(utxo, slot);
            self.accounts.unspent_value += value;
            self.accounts.unspent_count += 1;
            delta.created.push((address, utxo, value));
            touched.insert(address);
        }

        if tx.inputs.is_empty() {
            self.accounts.minted += tx.value;
        } else {
            self.accounts.fees += tx.fee;
        }
        delta.touched = touched.into_iter().collect();
        Ok(delta)
    }

    pub fn degree_snapshot(&self) -> DegreeSnapshot {
        DegreeSnapshot {
            addresses: self.slots.iter().map(|a| a.address_id).collect(),
            k_utxo: self.slots.iter().map(AddressState::k_utxo).collect(),
            k_out: self.slots.iter().map(|a| a.k_out).collect(),
            entities: self
                .entities
                .iter()
                .map(|(id, e)| (*id, (e.k_utxo_entity, e.k_out_entity)))
                .collect(),
        }
    }

    /// Recomputes unspent value and count by scanning every address.
    pub fn recount_unspent(&self) -> (u64, u64) {
        self.slots
            .iter()
            .fold((0, 0), |(v, n), a| (v + a.balance(), n + a.k_utxo()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::types::{TxInput, TxOutput};

    fn out(addr: u64, is_new: bool, values: &[u64]) -> TxOutput {
        TxOutput {
            address: AddressId(addr),
            is_new,
            external: false,
            values: values.to_vec(),
        }
    }

    fn coinbase(tx: u64, addr: u64, value: u64) -> TransactionRecord {
        TransactionRecord::new(TxId(tx), 0, vec![], vec![out(addr, true, &[value])], 0, true)
    }

    #[test]
    fn single_input_spend() {
        let mut ledger = Ledger::new();
        ledger.apply_transaction(&coinbase(0, 1, 5000)).unwrap();
        let a = AddressId(1);
        assert_eq!(ledger.address(a).unwrap().k_utxo(), 1);

        let tx = TransactionRecord::new(
            TxId(1),
            1,
            vec![TxInput { address: a, utxos: vec![(UtxoId::new(TxId(0), 0), 5000)] }],
            vec![out(2, true, &[4900])],
            100,
            false,
        );
        let delta = ledger.apply_transaction(&tx).unwrap();
        assert_eq!(delta.consumed.len(), 1);
        assert_eq!(delta.new_addresses, vec![AddressId(2)]);
        let sa = ledger.address(a).unwrap();
        assert_eq!((sa.k_utxo(), sa.k_out), (0, 1));
        assert_eq!(ledger.address(AddressId(2)).unwrap().k_utxo(), 1);

        let snap = ledger.degree_snapshot();
        assert_eq!(snap.addresses, vec![AddressId(1), AddressId(2)]);
        assert_eq!(snap.k_utxo, vec![0, 1]);
        assert_eq!(snap.k_out, vec![1, 0]);
        assert!(ledger.accounts().balanced());
        assert_eq!(ledger.accounts().fees, 100);
    }

    #[test]
    fn coinbase_only_creates() {
        let mut ledger = Ledger::new();
        let delta = ledger.apply_transaction(&coinbase(0, 7, 1_250_000_000)).unwrap();
        assert!(delta.consumed.is_empty());
        assert_eq!(delta.created.len(), 1);
        assert_eq!(ledger.accounts().minted, 1_250_000_000);
        assert_eq!(ledger.accounts().unspent_value, 1_250_000_000);
    }

    #[test]
    fn replay_is_double_spend() {
        let mut ledger = Ledger::new();
        ledger.apply_transaction(&coinbase(0, 1, 5000)).unwrap();
        let spend = |id| {
            TransactionRecord::new(
                TxId(id),
                1,
                vec![TxInput { address: AddressId(1), utxos: vec![(UtxoId::new(TxId(0), 0), 5000)] }],
                vec![out(2 + id, true, &[5000])],
                0,
                false,
            )
        };
        ledger.apply_transaction(&spend(1)).unwrap();
        let err = ledger.apply_transaction(&spend(2)).unwrap_err();
        assert_eq!(err, LedgerError::DoubleSpend { tx: TxId(2), utxo: UtxoId::new(TxId(0), 0) });
    }

    #[test]
    fn rejects_conservation_violation_without_mutation() {
        let mut ledger = Ledger::new();
        ledger.apply_transaction(&coinbase(0, 1, 5000)).unwrap();
        let mut tx = TransactionRecord::new(
            TxId(1),
            1,
            vec![TxInput { address: AddressId(1), utxos: vec![(UtxoId::new(TxId(0), 0), 5000)] }],
            vec![out(2, true, &[4000])],
            100,
            false,
        );
        let before = ledger.degree_snapshot();
        assert_eq!(ledger.apply_transaction(&tx).unwrap_err(), LedgerError::Conservation { tx: TxId(1) });
        assert_eq!(ledger.degree_snapshot(), before);
        tx.outputs[0].values = vec![4900];
        tx.outputs[0].is_new = false;
        assert!(matches!(ledger.apply_transaction(&tx), Err(LedgerError::Freshness { .. })));
    }

    #[test]
    fn entity_aggregates_follow_members() {
        let mut ledger = Ledger::new();
        ledger.register_entity(EntityId(0), Category::Exchange);
        ledger.register_entity(EntityId(1), Category::Service);
        ledger.apply_transaction(&coinbase(0, 1, 5000)).unwrap();
        ledger.assign_owner(AddressId(1), EntityId(0)).unwrap();
        assert_eq!(ledger.entity(EntityId(0)).unwrap().k_utxo_entity, 1);
        assert!(matches!(
            ledger.assign_owner(AddressId(1), EntityId(1)),
            Err(LedgerError::OwnershipConflict { .. })
        ));
        let tx = TransactionRecord::new(
            TxId(1),
            1,
            vec![TxInput { address: AddressId(1), utxos: vec![(UtxoId::new(TxId(0), 0), 5000)] }],
            vec![out(1, false, &[2000]), out(3, true, &[3000])],
            0,
            false,
        );
        ledger.apply_transaction(&tx).unwrap();
        let e = ledger.entity(EntityId(0)).unwrap();
        assert_eq!((e.k_utxo_entity, e.k_out_entity), (1, 1));
        let snap = ledger.degree_snapshot();
        assert_eq!(snap.entities[&EntityId(0)], (1, 1));
    }
}
