//! Per-entity feature matrix: address, entity, temporal, centrality and
//! motif groups.

mod address;
mod centrality;
mod index;
mod motifs;
mod temporal;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use address::extract_address_entity_features;
pub use centrality::{eigenvector_centrality, extract_centrality_features, pagerank, CENTRALITY_METRICS};
pub use index::EntitySet;
pub use motifs::{extract_motif_features, motif_quantities, MotifKind};
pub use temporal::{extract_temporal_features, week_of_day};

use crate::graph_core::{Block, Category, EntityId, UtxoId};
use crate::io::{IoError, LabelTable};
use index::StreamIndex;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("input spends unknown utxo {0}")]
    UnknownUtxo(UtxoId),
    #[error("motif order must be 1, 2 or 3, got {0}")]
    MotifOrder(usize),
    #[error("feature parts cover different entity sets")]
    EntityMismatch,
    #[error("column {0} appears twice")]
    DuplicateColumn(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Address,
    Entity,
    Temporal,
    Centrality,
    Motif1,
    Motif2,
    Motif3,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Address,
        FeatureGroup::Entity,
        FeatureGroup::Temporal,
        FeatureGroup::Centrality,
        FeatureGroup::Motif1,
        FeatureGroup::Motif2,
        FeatureGroup::Motif3,
    ];

    /// Declared column count of the group.
    pub fn width(self) -> usize {
        match self {
            FeatureGroup::Address => 10,
            FeatureGroup::Entity => 8,
            FeatureGroup::Temporal => 16,
            FeatureGroup::Centrality => 42,
            FeatureGroup::Motif1 => 44,
            FeatureGroup::Motif2 => 81,
            FeatureGroup::Motif3 => 114,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub group: FeatureGroup,
    pub description: String,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, group: FeatureGroup, description: impl Into<String>) -> Self {
        Self { name: name.into(), group, description: description.into() }
    }
}

/// Columns of one group for every entity row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePart {
    pub group: FeatureGroup,
    pub entity_ids: Vec<EntityId>,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<f64>>,
}

impl FeaturePart {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub entity_ids: Vec<EntityId>,
    pub labels: Vec<Category>,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Motif instances enumerated per order before switching to sampling.
    pub motif_cap: u64,
    pub motif_seed: u64,
    pub n_windows: usize,
    pub damping: f64,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            motif_cap: 2_000_000,
            motif_seed: 0,
            n_windows: 4,
            damping: 0.85,
            max_iter: 500,
            tolerance: 1e-12,
        }
    }
}

/// Column-aligned join of parts sharing one entity list.
pub fn build_feature_matrix(labels: &[Category], parts: Vec<FeaturePart>) -> Result<FeatureMatrix, FeatureError> {
    let Some(first) = parts.first() else {
        return Ok(FeatureMatrix { entity_ids: vec![], labels: vec![], columns: vec![], rows: vec![] });
    };
    let entity_ids = first.entity_ids.clone();
    if labels.len() != entity_ids.len() {
        return Err(FeatureError::EntityMismatch);
    }
    let mut columns = Vec::new();
    let mut rows = vec![Vec::new(); entity_ids.len()];
    let mut seen = HashMap::new();
    for part in parts {
        if part.entity_ids != entity_ids || part.rows.len() != entity_ids.len() {
            return Err(FeatureError::EntityMismatch);
        }
        for c in &part.columns {
            if seen.insert(c.name.clone(), ()).is_some() {
                return Err(FeatureError::DuplicateColumn(c.name.clone()));
            }
        }
        columns.extend(part.columns);
        for (row, r) in rows.iter_mut().zip(part.rows) {
            row.extend(r);
        }
    }
    Ok(FeatureMatrix { entity_ids, labels: labels.to_vec(), columns, rows })
}

/// All groups, with entities from `labels` or else from multi-input clustering.
pub fn extract_features(
    blocks: &[Block],
    labels: Option<&LabelTable>,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let entities = match labels {
        Some(l) => EntitySet::from_labels(l),
        None => EntitySet::from_clustering(blocks),
    };
    let index = StreamIndex::build(blocks, &entities)?;
    let (address, entity) = address::from_index(&index, &entities, blocks);
    let parts = vec![
        address,
        entity,
        temporal::from_index(&index, &entities),
        centrality::from_index(&index, &entities, cfg),
        motifs::from_index(&index, &entities, 1, cfg)?,
        motifs::from_index(&index, &entities, 2, cfg)?,
        motifs::from_index(&index, &entities, 3, cfg)?,
    ];
    build_feature_matrix(&entities.labels, parts)
}

impl FeatureMatrix {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn group_widths(&self) -> Vec<(FeatureGroup, usize)> {
        FeatureGroup::ALL
            .iter()
            .map(|&g| (g, self.columns.iter().filter(|c| c.group == g).count()))
            .collect()
    }

    /// `entity_id,label,<columns>` with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["entity_id".to_string(), "label".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for ((id, label), row) in self.entity_ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.to_string(), label.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            groups: self.group_widths().into_iter().collect(),
            columns: self.columns.clone(),
        }
    }

    pub fn save(&self, csv_path: &Path, schema_path: &Path) -> Result<(), FeatureError> {
        let f = std::fs::File::create(csv_path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        crate::io::write_json(schema_path, &self.schema())?;
        Ok(())
    }

    /// Reads a matrix back from `features.csv`; column groups come from the
    /// schema columns in order.
    pub fn read_csv(path: &Path, schema: &[ColumnSpec]) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let names: Vec<&str> = header.iter().skip(2).collect();
        let expected: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
        if header.get(0) != Some("entity_id") || header.get(1) != Some("label") || names != expected {
            return Err(FeatureError::Io(IoError::Malformed {
                line: 1,
                key: "header".into(),
                message: "header does not match the schema".into(),
            }));
        }
        let mut m = FeatureMatrix { entity_ids: vec![], labels: vec![], columns: schema.to_vec(), rows: vec![] };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |key: &str, message: String| {
                FeatureError::Io(IoError::Malformed { line: i + 2, key: key.into(), message })
            };
            let id = rec[0].parse::<u32>().map_err(|e| bad("entity_id", e.to_string()))?;
            let label = rec[1].parse::<Category>().map_err(|e| bad("label", e))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>().map_err(|e| bad("value", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            m.entity_ids.push(EntityId(id));
            m.labels.push(label);
            m.rows.push(row);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub groups: std::collections::BTreeMap<FeatureGroup, usize>,
    pub columns: Vec<ColumnSpec>,
}

/// Mean and population std of a sample, both 0 when empty.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}
