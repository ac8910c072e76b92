use std::collections::BTreeMap;

use super::index::{EntitySet, StreamIndex};
use super::{mean_std, ColumnSpec, FeatureError, FeatureGroup, FeaturePart};
use crate::graph_core::{sat_to_btc, AddressId, Block, TxId};

#[derive(Debug, Clone, Default)]
struct AddressTotals {
    received: u64,
    spent: u64,
    receiving_txs: Vec<TxId>,
    spending_txs: Vec<TxId>,
    utxos_received: u64,
}

const ADDRESS_QUANTITIES: [(&str, &str); 5] = [
    ("received_btc", "BTC received by an address"),
    ("balance_btc", "unspent BTC held by an address"),
    ("n_tx_receiving", "transactions paying an address"),
    ("n_tx_spending", "transactions spending from an address"),
    ("n_utxo_received", "UTXOs received by an address"),
];

const ENTITY_COLUMNS: [(&str, &str); 8] = [
    ("entity_n_addresses", "addresses of the entity seen in the stream"),
    ("entity_received_btc", "total BTC received"),
    ("entity_sent_btc", "total BTC spent from the entity's addresses"),
    ("entity_balance_btc", "received minus spent"),
    ("entity_n_tx_receiving", "distinct transactions paying the entity"),
    ("entity_n_tx_spending", "distinct transactions spending from the entity"),
    ("entity_n_coinbase", "coinbase transactions paying the entity"),
    ("entity_coinbase_proportion", "coinbase share of receiving transactions"),
];

/// Address group (mean and std over the entity's addresses) and entity totals.
pub fn extract_address_entity_features(
    blocks: &[Block],
    entities: &EntitySet,
) -> Result<(FeaturePart, FeaturePart), FeatureError> {
    let index = StreamIndex::build(blocks, entities)?;
    Ok(from_index(&index, entities, blocks))
}

pub(crate) fn from_index(index: &StreamIndex, entities: &EntitySet, blocks: &[Block]) -> (FeaturePart, FeaturePart) {
    let mut per_address: BTreeMap<AddressId, AddressTotals> = BTreeMap::new();
    for t in blocks.iter().flat_map(|b| &b.transactions) {
        for i in &t.inputs {
            let a = per_address.entry(i.address).or_default();
            a.spent += i.value();
            if a.spending_txs.last() != Some(&t.tx_id) {
                a.spending_txs.push(t.tx_id);
            }
        }
        for o in t.internal_outputs() {
            let a = per_address.entry(o.address).or_default();
            a.received += o.value();
            a.utxos_received += o.values.len() as u64;
            if a.receiving_txs.last() != Some(&t.tx_id) {
                a.receiving_txs.push(t.tx_id);
            }
        }
    }

    let n = entities.len();
    let mut samples: Vec<[Vec<f64>; 5]> = vec![Default::default(); n];
    for (addr, a) in &per_address {
        let Some(e) = entities.row_of(*addr) else { continue };
        let values = [
            sat_to_btc(a.received),
            sat_to_btc(a.received - a.spent),
            a.receiving_txs.len() as f64,
            a.spending_txs.len() as f64,
            a.utxos_received as f64,
        ];
        for (s, v) in samples[e].iter_mut().zip(values) {
            s.push(v);
        }
    }

    let mut address_cols = Vec::new();
    for (q, d) in ADDRESS_QUANTITIES {
        address_cols.push(ColumnSpec::new(format!("addr_{q}_mean"), FeatureGroup::Address, format!("mean over addresses: {d}")));
        address_cols.push(ColumnSpec::new(format!("addr_{q}_std"), FeatureGroup::Address, format!("std over addresses: {d}")));
    }
    let address_rows = samples
        .iter()
        .map(|qs| {
            qs.iter()
                .flat_map(|s| {
                    let (m, sd) = mean_std(s);
                    [m, sd]
                })
                .collect()
        })
        .collect();

    let mut received = vec![0u64; n];
    let mut sent = vec![0u64; n];
    let mut n_recv = vec![0u64; n];
    let mut n_send = vec![0u64; n];
    let mut n_coinbase = vec![0u64; n];
    for t in &index.txs {
        for &(e, v) in &t.receivers {
            received[e] += v;
            n_recv[e] += 1;
            n_coinbase[e] += t.coinbase as u64;
        }
        for &(e, v) in &t.senders {
            sent[e] += v;
            n_send[e] += 1;
        }
    }
    let entity_rows = (0..n)
        .map(|e| {
            let prop = if n_recv[e] == 0 { 0.0 } else { n_coinbase[e] as f64 / n_recv[e] as f64 };
            vec![
                samples[e][0].len() as f64,
                sat_to_btc(received[e]),
                sat_to_btc(sent[e]),
                sat_to_btc(received[e]) - sat_to_btc(sent[e]),
                n_recv[e] as f64,
                n_send[e] as f64,
                n_coinbase[e] as f64,
                prop,
            ]
        })
        .collect();
    let entity_cols = ENTITY_COLUMNS.iter().map(|(c, d)| ColumnSpec::new(*c, FeatureGroup::Entity, *d)).collect();

    (
        FeaturePart { group: FeatureGroup::Address, entity_ids: entities.ids.clone(), columns: address_cols, rows: address_rows },
        FeaturePart { group: FeatureGroup::Entity, entity_ids: entities.ids.clone(), columns: entity_cols, rows: entity_rows },
    )
}
