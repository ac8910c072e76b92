use std::io::Write;

use serde::Serialize;

use super::holdout::{output_values_by_scope, ALL_SCOPE};
use crate::graph_core::{sat_to_btc, Block};

/// One distinct value of the empirical complementary CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcdfPoint {
    pub value_sat: u64,
    /// Observations equal to `value_sat`.
    pub count: u64,
    /// P(V > value).
    pub ccdf: f64,
}

/// Empirical 1 − CDF of a sample, one point per distinct value, ascending.
pub fn empirical_ccdf(values: &[u64]) -> Vec<CcdfPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let j = sorted.partition_point(|&x| x <= v);
        out.push(CcdfPoint { value_sat: v, count: (j - i) as u64, ccdf: (sorted.len() - j) as f64 / n });
        i = j;
    }
    out
}

/// 1 − CDF of the internal output UTXO values of ordinary transactions.
pub fn utxo_value_ccdf(blocks: &[Block]) -> Vec<CcdfPoint> {
    empirical_ccdf(&output_values_by_scope(blocks, None)[ALL_SCOPE])
}

/// CSV with log10 columns; these are empty where the value or tail is zero.
pub fn write_ccdf<W: Write>(points: &[CcdfPoint], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value_sat", "value_btc", "count", "ccdf", "log10_value_btc", "log10_ccdf"])?;
    let log = |x: f64| if x > 0.0 { x.log10().to_string() } else { String::new() };
    for p in points {
        let btc = sat_to_btc(p.value_sat);
        w.write_record([
            p.value_sat.to_string(),
            btc.to_string(),
            p.count.to_string(),
            p.ccdf.to_string(),
            log(btc),
            log(p.ccdf),
        ])?;
    }
    w.flush()
}
