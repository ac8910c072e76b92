use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::graph_core::{AddressId, Category, EntityId};

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    address_id: u64,
    entity_id: u32,
    category: String,
}

/// Validated address → (entity, category) mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    addresses: BTreeMap<AddressId, EntityId>,
    entities: BTreeMap<EntityId, Category>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: AddressId, entity: EntityId, category: Category) -> Result<(), IoError> {
        if category == Category::Unknown {
            return Err(IoError::Labels(format!("address {address}: category must be one of Exchange, Service, Gambling, MiningPool")));
        }
        match self.entities.get(&entity) {
            Some(&c) if c != category => {
                return Err(IoError::Labels(format!("entity {entity} labeled both {c} and {category}")));
            }
            _ => {}
        }
        match self.addresses.get(&address) {
            Some(&e) if e != entity => {
                return Err(IoError::Labels(format!("address {address} assigned to entities {e} and {entity}")));
            }
            _ => {}
        }
        self.entities.insert(entity, category);
        self.addresses.insert(address, entity);
        Ok(())
    }

    pub fn from_rows<I>(rows: I) -> Result<Self, IoError>
    where
        I: IntoIterator<Item = (AddressId, EntityId, Category)>,
    {
        let mut t = Self::new();
        for (a, e, c) in rows {
            t.insert(a, e, c)?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn get(&self, address: AddressId) -> Option<(EntityId, Category)> {
        let e = *self.addresses.get(&address)?;
        Some((e, self.entities[&e]))
    }

    pub fn entity_of(&self, address: AddressId) -> Option<EntityId> {
        self.addresses.get(&address).copied()
    }

    pub fn category_of(&self, entity: EntityId) -> Option<Category> {
        self.entities.get(&entity).copied()
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, Category> {
        &self.entities
    }

    pub fn rows(&self) -> impl Iterator<Item = (AddressId, EntityId, Category)> + '_ {
        self.addresses.iter().map(|(&a, &e)| (a, e, self.entities[&e]))
    }

    /// Number of entities per category.
    pub fn entity_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts = BTreeMap::new();
        for &c in self.entities.values() {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }
}

pub fn read_labels<R: Read>(reader: R) -> Result<LabelTable, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| IoError::Csv(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["address_id", "entity_id", "category"] {
        return Err(IoError::Labels(format!(
            "expected header address_id,entity_id,category, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = LabelTable::new();
    for (i, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| IoError::Csv(format!("row {}: {e}", i + 2)))?;
        let category: Category = row.category.parse().map_err(IoError::Labels)?;
        table.insert(AddressId(row.address_id), EntityId(row.entity_id), category)?;
    }
    Ok(table)
}

pub fn parse_labels(path: &Path) -> Result<LabelTable, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::Open { path: path.display().to_string(), source: e })?;
    read_labels(file)
}

pub fn write_labels<W: Write>(writer: W, table: &LabelTable) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for (a, e, c) in table.rows() {
        w.serialize(LabelRow { address_id: a.0, entity_id: e.0, category: c.to_string() })
            .map_err(|e| IoError::Csv(e.to_string()))?;
    }
    w.flush().map_err(IoError::Read)?;
    Ok(())
}
