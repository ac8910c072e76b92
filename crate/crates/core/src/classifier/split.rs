use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::features::FeatureMatrix;
use crate::graph_core::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescriptor {
    pub train_fraction: f64,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub per_class: BTreeMap<Category, (usize, usize)>,
}

fn subset(m: &FeatureMatrix, rows: &[usize]) -> FeatureMatrix {
    FeatureMatrix {
        entity_ids: rows.iter().map(|&i| m.entity_ids[i]).collect(),
        labels: rows.iter().map(|&i| m.labels[i]).collect(),
        columns: m.columns.clone(),
        rows: rows.iter().map(|&i| m.rows[i].clone()).collect(),
    }
}

/// Stratified split: each class contributes `round(fraction · n_c)` rows to
/// training, clamped so both sides get at least one.
pub fn split_train_test(
    m: &FeatureMatrix,
    fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix, SplitDescriptor), ClassifierError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ClassifierError::InvalidParams(format!("train fraction {fraction} not in (0, 1)")));
    }
    let mut by_class: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for (i, &c) in m.labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut per_class = BTreeMap::new();
    for (c, mut rows) in by_class {
        if rows.len() < 2 {
            return Err(ClassifierError::TooFewRows(c));
        }
        rows.shuffle(&mut rng);
        let k = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        per_class.insert(c, (k, rows.len() - k));
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let desc = SplitDescriptor { train_fraction: fraction, seed, train_rows: train.len(), test_rows: test.len(), per_class };
    Ok((subset(m, &train), subset(m, &test), desc))
}
