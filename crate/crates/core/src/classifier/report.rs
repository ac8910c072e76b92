use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::gbdt::{GbdtModel, Node};
use super::split::SplitDescriptor;
use super::ClassifierError;
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::graph_core::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub category: Category,
    pub support: u64,
    /// One-vs-all accuracy.
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub accuracy: f64,
    /// Support-weighted over classes where the metric is defined.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Accuracy of always predicting the most frequent test class.
    pub majority_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<Category>,
    /// `confusion[true][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub overall: OverallMetrics,
    pub split: Option<SplitDescriptor>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn weighted(values: impl Iterator<Item = (Option<f64>, u64)>) -> Option<f64> {
    let (mut s, mut w) = (0.0, 0u64);
    for (v, n) in values {
        if let (Some(v), true) = (v, n > 0) {
            s += v * n as f64;
            w += n;
        }
    }
    (w > 0).then(|| s / w as f64)
}

/// Metrics from a confusion matrix alone.
pub fn report_from_confusion(classes: Vec<Category>, confusion: Vec<Vec<u64>>) -> ClassificationReport {
    let k = classes.len();
    let total: u64 = confusion.iter().flatten().sum();
    let support: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted: Vec<u64> = (0..k).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i];
            let fp = predicted[i] - tp;
            let fn_ = support[i] - tp;
            let tn = total - tp - fp - fn_;
            ClassMetrics {
                category: classes[i],
                support: support[i],
                accuracy: ratio(tp + tn, total).unwrap_or(0.0),
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
            }
        })
        .collect();
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let overall = OverallMetrics {
        accuracy: ratio(trace, total).unwrap_or(0.0),
        precision: weighted(per_class.iter().map(|m| (m.precision, m.support))),
        recall: weighted(per_class.iter().map(|m| (m.recall, m.support))),
        f1: weighted(per_class.iter().map(|m| (m.f1, m.support))),
        majority_baseline: ratio(support.iter().copied().max().unwrap_or(0), total).unwrap_or(0.0),
    };
    ClassificationReport { classes, confusion, per_class, overall, split: None }
}

pub fn evaluate(model: &GbdtModel, test: &FeatureMatrix) -> Result<ClassificationReport, ClassifierError> {
    if test.columns.len() != model.columns.len()
        || test.columns.iter().zip(&model.columns).any(|(c, m)| &c.name != m)
    {
        return Err(ClassifierError::ColumnMismatch);
    }
    let mut classes: Vec<Category> = model.classes.iter().chain(&test.labels).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let pos: BTreeMap<Category, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    for (x, y) in test.rows.iter().zip(&test.labels) {
        confusion[pos[y]][pos[&model.predict(x)]] += 1;
    }
    Ok(report_from_confusion(classes, confusion))
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `true\predicted` header followed by one row per true class.
    pub fn write_confusion_csv<W: Write>(&self, out: W) -> Result<(), ClassifierError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.classes.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let mut rec = vec![c.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub column: String,
    pub group: FeatureGroup,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Columns with positive gain, highest first.
    pub ranking: Vec<RankedFeature>,
    pub by_group: BTreeMap<FeatureGroup, f64>,
    /// Ranking within each one-vs-all ensemble.
    pub by_class: BTreeMap<Category, Vec<RankedFeature>>,
    pub total_gain: f64,
}

fn rank(model: &GbdtModel, gains: &[f64]) -> Vec<RankedFeature> {
    let mut r: Vec<RankedFeature> = gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > 0.0)
        .map(|(i, &g)| RankedFeature { column: model.columns[i].clone(), group: model.groups[i], gain: g })
        .collect();
    r.sort_by(|a, b| b.gain.total_cmp(&a.gain).then_with(|| a.column.cmp(&b.column)));
    r
}

pub fn feature_importance_report(model: &GbdtModel) -> ImportanceReport {
    let mut total = vec![0.0; model.columns.len()];
    let mut by_class = BTreeMap::new();
    for (c, trees) in model.classes.iter().zip(&model.trees) {
        let mut gains = vec![0.0; model.columns.len()];
        for node in trees.iter().flat_map(|t| &t.nodes) {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
        for (t, g) in total.iter_mut().zip(&gains) {
            *t += g;
        }
        by_class.insert(*c, rank(model, &gains));
    }
    let ranking = rank(model, &total);
    let mut by_group = BTreeMap::new();
    for f in &ranking {
        *by_group.entry(f.group).or_insert(0.0) += f.gain;
    }
    let total_gain = ranking.iter().map(|f| f.gain).sum();
    ImportanceReport { ranking, by_group, by_class, total_gain }
}
