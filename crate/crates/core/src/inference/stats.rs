use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::distributions::{binom_ratio_mle, bgeom_mle_counts, tpois_lambda_for_mean, DistError};
use crate::graph_core::{Ledger, TransactionRecord};

/// Running mean and population variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Sums for the Pearson coefficient of (I_t, O_t).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairSums {
    pub n: u64,
    x: Moments,
    y: Moments,
    c: f64,
}

impl PairSums {
    pub fn push(&mut self, x: f64, y: f64) {
        let dx = x - self.x.mean;
        self.x.push(x);
        self.y.push(y);
        self.n += 1;
        self.c += dx * (y - self.y.mean);
    }

    pub fn merge(&mut self, other: &PairSums) {
        if other.n == 0 {
            return;
        }
        let n = (self.n + other.n) as f64;
        let (dx, dy) = (other.x.mean - self.x.mean, other.y.mean - self.y.mean);
        self.c += other.c + dx * dy * self.n as f64 * other.n as f64 / n;
        self.x.merge(&other.x);
        self.y.merge(&other.y);
        self.n += other.n;
    }

    pub fn pearson(&self) -> Result<f64, InferenceError> {
        if self.n < 2 {
            return Err(InferenceError::TooFewTransactions(self.n));
        }
        let (vx, vy) = (self.x.variance(), self.y.variance());
        if vx == 0.0 || vy == 0.0 {
            return Err(InferenceError::UndefinedCorrelation);
        }
        Ok((self.c / self.n as f64) / (vx * vy).sqrt())
    }
}

/// Everything the per-node estimators need, for one scope.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SufficientStats {
    pub txs: u64,
    pub inputs: u64,
    /// Transactions with at least one internal output.
    pub txs_with_outputs: u64,
    pub outputs: u64,
    pub new_outputs: u64,
    /// (UTXOs spent, UTXOs held before the tx) → count, per input address.
    pub utxo_in: BTreeMap<(u64, u64), u64>,
    pub output_utxos: u64,
    pub fees: Moments,
    pub pairs: PairSums,
}

impl SufficientStats {
    /// Accumulates an ordinary transaction. `ledger` must be the state
    /// immediately before `tx` is applied.
    pub fn observe(&mut self, tx: &TransactionRecord, ledger: &Ledger) {
        self.txs += 1;
        self.inputs += tx.inputs.len() as u64;
        for input in &tx.inputs {
            let k = ledger.address(input.address).map_or(0, |a| a.k_utxo());
            *self.utxo_in.entry((input.utxos.len() as u64, k)).or_default() += 1;
        }
        let o = tx.internal_outputs().count() as u64;
        if o > 0 {
            self.txs_with_outputs += 1;
        }
        self.outputs += o;
        for out in tx.internal_outputs() {
            self.new_outputs += out.is_new as u64;
            self.output_utxos += out.values.len() as u64;
        }
        self.fees.push(tx.fee as f64);
        self.pairs.push(tx.inputs.len() as f64, o as f64);
    }

    pub fn merge(&mut self, other: &SufficientStats) {
        self.txs += other.txs;
        self.inputs += other.inputs;
        self.txs_with_outputs += other.txs_with_outputs;
        self.outputs += other.outputs;
        self.new_outputs += other.new_outputs;
        for (&key, &c) in &other.utxo_in {
            *self.utxo_in.entry(key).or_default() += c;
        }
        self.output_utxos += other.output_utxos;
        self.fees.merge(&other.fees);
        self.pairs.merge(&other.pairs);
    }

    pub fn fit(&self) -> Result<ScopeFit, InferenceError> {
        if self.txs == 0 {
            return Err(InferenceError::Empty);
        }
        let lambda_in = tpois_lambda_for_mean(self.inputs as f64 / self.txs as f64)?;
        let lambda_out = if self.txs_with_outputs == 0 {
            return Err(InferenceError::Distribution(DistError::EmptySample));
        } else {
            tpois_lambda_for_mean(self.outputs as f64 / self.txs_with_outputs as f64)?
        };
        let p_new = binom_ratio_mle(self.new_outputs, self.outputs)?;
        let p_utxo_in = bgeom_mle_counts(&self.utxo_in)?;
        let p_utxo_out = self.outputs as f64 / self.output_utxos as f64;
        Ok(ScopeFit {
            lambda_in,
            lambda_out,
            p_new,
            p_utxo_in,
            p_utxo_out,
            mu_fee_sat: self.fees.mean,
            sigma_fee_sat: self.fees.std(),
            counts: SampleCounts {
                txs: self.txs,
                inputs: self.inputs,
                outputs: self.outputs,
                output_utxos: self.output_utxos,
            },
            activity: None,
        })
    }
}

/// Sample sizes behind a scope's estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub txs: u64,
    pub inputs: u64,
    pub outputs: u64,
    pub output_utxos: u64,
}

/// Fitted transaction-level parameters of one scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScopeFit {
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub p_new: f64,
    pub p_utxo_in: f64,
    pub p_utxo_out: f64,
    pub mu_fee_sat: f64,
    pub sigma_fee_sat: f64,
    pub counts: SampleCounts,
    /// Share of transactions, for category scopes.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub activity: Option<f64>,
}
