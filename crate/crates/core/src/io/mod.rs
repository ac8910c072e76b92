//! File formats: block streams as JSON lines, label tables as CSV and
//! parameter files as JSON.

mod blocks;
mod labels;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::graph_core::{LedgerError, TxId};

pub use blocks::{block_to_line, open_blocks, parse_blocks, parse_blocks_str, write_blocks, BlockReader};
pub use labels::{parse_labels, read_labels, write_labels, LabelTable};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("read error: {0}")]
    Read(#[from] std::io::Error),
    #[error("line {line}: malformed block at `{key}`: {message}")]
    Malformed { line: usize, key: String, message: String },
    #[error("line {line}: height {found} does not follow {previous}")]
    Height { line: usize, previous: u64, found: u64 },
    #[error("line {line}: timestamp of block {height} decreases")]
    Timestamp { line: usize, height: u64 },
    #[error("line {line}: transaction {tx} rejected: {source}")]
    Invalid { line: usize, tx: TxId, source: LedgerError },
    #[error("labels: {0}")]
    Labels(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{path}: {message}")]
    Json { path: String, message: String },
}

/// Reads a JSON document, reporting the path of the first offending key.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Open { path: path.display().to_string(), source: e })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(IoError::Read)
}
