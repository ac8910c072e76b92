use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stats::{PairSums, ScopeFit, SufficientStats};
use super::InferenceError;
use crate::block_model::{CategoryParams, CategorySpec, ModelParams};
use crate::graph_core::{Block, Category, Ledger, TransactionRecord};
use crate::io::LabelTable;

/// Fitted parameters, globally and per category, with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_blocks: u64,
    pub lambda_size: f64,
    pub all: ScopeFit,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categories: BTreeMap<Category, ScopeFit>,
    /// Pearson coefficient of (I_t, O_t); absent when undefined.
    pub pearson_in_out: Option<f64>,
    /// Transactions whose labeled inputs span several entities (excluded).
    pub contradictions: u64,
}

impl FitReport {
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            lambda_size: self.lambda_size,
            lambda_in: self.all.lambda_in,
            lambda_out: self.all.lambda_out,
            p_new: self.all.p_new,
            p_utxo_in: self.all.p_utxo_in,
            p_utxo_out: self.all.p_utxo_out,
            mu_fee_sat: self.all.mu_fee_sat,
            sigma_fee_sat: self.all.sigma_fee_sat,
        }
    }

    /// Category table over the labeled categories, activity renormalized to 1.
    pub fn category_params(&self) -> Option<CategoryParams> {
        let labeled: Vec<_> = self
            .categories
            .iter()
            .filter(|(c, _)| **c != Category::Unknown)
            .collect();
        let total: f64 = labeled.iter().map(|(_, f)| f.activity.unwrap_or(0.0)).sum();
        if labeled.is_empty() || total <= 0.0 {
            return None;
        }
        let categories = labeled
            .into_iter()
            .map(|(&c, f)| {
                let spec = CategorySpec {
                    lambda_in: f.lambda_in,
                    lambda_out: f.lambda_out,
                    p_new: f.p_new,
                    p_utxo_in: f.p_utxo_in,
                    p_utxo_out: f.p_utxo_out,
                    activity: f.activity.unwrap_or(0.0) / total,
                };
                (c, spec)
            })
            .collect();
        Some(CategoryParams { categories })
    }
}

/// Replays a stream into a fresh ledger, handing every transaction to `visit`
/// together with the ledger state right before it.
pub fn replay<'a, I, F>(blocks: I, mut visit: F) -> Result<Ledger, InferenceError>
where
    I: IntoIterator<Item = &'a Block>,
    F: FnMut(&Block, &TransactionRecord, &Ledger),
{
    let mut ledger = Ledger::new();
    for block in blocks {
        for tx in &block.transactions {
            visit(block, tx, &ledger);
            ledger.apply_transaction(tx)?;
        }
    }
    Ok(ledger)
}

/// Scope of a transaction under a label table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    Category(Category),
    /// Inputs labeled with more than one entity.
    Contradiction,
}

pub fn route(tx: &TransactionRecord, labels: &LabelTable) -> Routing {
    let mut entities = BTreeSet::new();
    let mut unlabeled = false;
    for a in tx.input_addresses() {
        match labels.get(a) {
            Some(found) => {
                entities.insert(found);
            }
            None => unlabeled = true,
        }
    }
    match entities.len() {
        0 => Routing::Category(Category::Unknown),
        1 if !unlabeled => Routing::Category(entities.into_iter().next().expect("one entry").1),
        1 => Routing::Category(Category::Unknown),
        _ => Routing::Contradiction,
    }
}

struct Accumulated {
    n_blocks: u64,
    ordinary: u64,
    all: SufficientStats,
    pairs: PairSums,
    scopes: BTreeMap<Category, SufficientStats>,
    contradictions: u64,
}

fn accumulate(blocks: &[Block], labels: Option<&LabelTable>) -> Result<Accumulated, InferenceError> {
    let mut acc = Accumulated {
        n_blocks: blocks.len() as u64,
        ordinary: 0,
        all: SufficientStats::default(),
        pairs: PairSums::default(),
        scopes: BTreeMap::new(),
        contradictions: 0,
    };
    replay(blocks, |_, tx, ledger| {
        if !tx.is_ordinary() {
            return;
        }
        acc.ordinary += 1;
        let scope = match labels.map(|l| route(tx, l)) {
            None => None,
            Some(Routing::Contradiction) => {
                acc.contradictions += 1;
                return;
            }
            Some(Routing::Category(c)) => Some(c),
        };
        acc.all.observe(tx, ledger);
        acc.pairs.push(tx.inputs.len() as f64, tx.internal_outputs().count() as f64);
        if let Some(c) = scope {
            acc.scopes.entry(c).or_default().observe(tx, ledger);
        }
    })?;
    Ok(acc)
}

fn report(acc: Accumulated) -> Result<FitReport, InferenceError> {
    if acc.all.txs == 0 {
        return Err(InferenceError::Empty);
    }
    let all = acc.all.fit()?;
    let mut categories = BTreeMap::new();
    for (c, stats) in &acc.scopes {
        let mut fit = stats.fit()?;
        fit.activity = Some(stats.txs as f64 / acc.all.txs as f64);
        categories.insert(*c, fit);
    }
    Ok(FitReport {
        n_blocks: acc.n_blocks,
        lambda_size: acc.ordinary as f64 / acc.n_blocks as f64,
        all,
        categories,
        pearson_in_out: acc.pairs.pearson().ok(),
        contradictions: acc.contradictions,
    })
}

/// Maximum-likelihood fit of the address-level model over every ordinary
/// transaction of the stream.
pub fn fit_bta(blocks: &[Block]) -> Result<FitReport, InferenceError> {
    report(accumulate(blocks, None)?)
}

/// Fit of the entity-level model: transactions are split by the category of
/// their input entity and the address-level estimators run per scope.
pub fn fit_btea(blocks: &[Block], labels: &LabelTable) -> Result<FitReport, InferenceError> {
    report(accumulate(blocks, Some(labels))?)
}

/// Pearson coefficient of input and output address counts.
pub fn independence_diagnostic(blocks: &[Block]) -> Result<f64, InferenceError> {
    let mut pairs = PairSums::default();
    for tx in blocks.iter().flat_map(|b| &b.transactions).filter(|t| t.is_ordinary()) {
        pairs.push(tx.inputs.len() as f64, tx.internal_outputs().count() as f64);
    }
    pairs.pearson()
}
