use super::index::{EntitySet, StreamIndex};
use super::{ColumnSpec, FeatureConfig, FeatureError, FeatureGroup, FeaturePart};
use crate::graph_core::{sat_to_btc, Block};
use crate::inference::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotifKind {
    Direct,
    /// Some consecutive entities on the path coincide.
    Loop,
}

const ROLES: [&str; 2] = ["src", "dst"];
const KINDS: [&str; 2] = ["direct", "loop"];

/// Quantity names of an order-`n` motif, in column order.
pub fn motif_quantities(n: usize) -> Vec<String> {
    let mut q: Vec<String> = ["nb_inputs", "nb_outputs", "in_val", "out_val"].map(String::from).into();
    q.extend((2..=n).map(|k| format!("nb_address_{k}")));
    q.extend((1..=n).map(|k| format!("fee_{k}")));
    q.extend((1..n).map(|k| format!("mid_val_{k}")));
    q.extend((1..n).map(|k| format!("delay_{k}")));
    q
}

fn describe(q: &str) -> String {
    let (base, k) = match q.rsplit_once('_') {
        Some((b, k)) if k.chars().all(|c| c.is_ascii_digit()) => (b, k),
        _ => (q, ""),
    };
    match base {
        "nb_inputs" => "inputs of the first transaction".into(),
        "nb_outputs" => "outputs of the last transaction".into(),
        "in_val" => "BTC the first entity puts into the first transaction".into(),
        "out_val" => "BTC the last entity receives from the last transaction".into(),
        "nb_address" => format!("addresses through which entity {k} relays"),
        "fee" => format!("fee of transaction {k} in BTC"),
        "mid_val" => format!("BTC received in transaction {k} and spent in the next"),
        "delay" => format!("blocks between transaction {k} and the next"),
        _ => q.into(),
    }
}

fn mix(mut h: u64, x: u64) -> u64 {
    h ^= x.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone, Default)]
struct Cell {
    count: u64,
    q: Vec<Moments>,
}

struct Walker<'a> {
    index: &'a StreamIndex,
    order: usize,
    /// [entity][role][kind]
    cells: Vec<[[Cell; 2]; 2]>,
    distinct: Vec<Moments>,
    txs: Vec<usize>,
    ents: Vec<usize>,
    mids: Vec<(f64, f64)>,
}

impl Walker<'_> {
    fn walk(&mut self, in_val: f64) {
        let cur = *self.txs.last().expect("path has a transaction");
        let tx = &self.index.txs[cur];
        if self.txs.len() == self.order {
            for &(r, v) in &tx.receivers {
                self.ents.push(r);
                self.emit(in_val, sat_to_btc(v));
                self.ents.pop();
            }
            return;
        }
        for link in &tx.links {
            self.txs.push(link.next);
            self.ents.push(link.entity);
            self.mids.push((sat_to_btc(link.value), link.n_addresses as f64));
            self.walk(in_val);
            self.mids.pop();
            self.ents.pop();
            self.txs.pop();
        }
    }

    fn emit(&mut self, in_val: f64, out_val: f64) {
        let v = &self.index.txs;
        let first = &v[self.txs[0]];
        let last = &v[*self.txs.last().unwrap()];
        let mut q = vec![first.n_inputs as f64, last.n_outputs as f64, in_val, out_val];
        q.extend(self.mids.iter().map(|m| m.1));
        q.extend(self.txs.iter().map(|&t| sat_to_btc(v[t].fee)));
        q.extend(self.mids.iter().map(|m| m.0));
        q.extend(self.txs.windows(2).map(|w| (v[w[1]].height - v[w[0]].height) as f64));
        let kind = self.ents.windows(2).any(|w| w[0] == w[1]) as usize;
        let anchors = [self.ents[0], *self.ents.last().unwrap()];
        for (role, &e) in anchors.iter().enumerate() {
            let cell = &mut self.cells[e][role][kind];
            cell.count += 1;
            if cell.q.is_empty() {
                cell.q = vec![Moments::default(); q.len()];
            }
            for (m, &x) in cell.q.iter_mut().zip(&q) {
                m.push(x);
            }
        }
        let mut d = self.ents.clone();
        d.sort_unstable();
        d.dedup();
        self.distinct[anchors[0]].push(d.len() as f64);
    }
}

/// Order-`n` motif aggregates anchored at each entity, as source and as
/// destination, split into direct and loop paths.
pub fn extract_motif_features(
    blocks: &[Block],
    entities: &EntitySet,
    order: usize,
    cfg: &FeatureConfig,
) -> Result<FeaturePart, FeatureError> {
    let index = StreamIndex::build(blocks, entities)?;
    from_index(&index, entities, order, cfg)
}

pub(crate) fn from_index(
    index: &StreamIndex,
    entities: &EntitySet,
    order: usize,
    cfg: &FeatureConfig,
) -> Result<FeaturePart, FeatureError> {
    if !(1..=3).contains(&order) {
        return Err(FeatureError::MotifOrder(order));
    }
    // completions[t][d]: paths from t with d more hops, then a final receiver.
    let n_tx = index.txs.len();
    let mut completions = vec![[0f64; 3]; n_tx];
    for t in (0..n_tx).rev() {
        let tx = &index.txs[t];
        completions[t][0] = tx.receivers.len() as f64;
        for d in 1..order {
            completions[t][d] = tx.links.iter().map(|l| completions[l.next][d - 1]).sum();
        }
    }
    let total: f64 = index.txs.iter().zip(&completions).map(|(t, c)| t.senders.len() as f64 * c[order - 1]).sum();
    let rate = if total > cfg.motif_cap as f64 { cfg.motif_cap as f64 / total } else { 1.0 };
    let threshold = (rate * u64::MAX as f64) as u64;

    let mut w = Walker {
        index,
        order,
        cells: vec![Default::default(); entities.len()],
        distinct: vec![Moments::default(); entities.len()],
        txs: Vec::with_capacity(order),
        ents: Vec::with_capacity(order + 1),
        mids: Vec::with_capacity(order),
    };
    for (t, tx) in index.txs.iter().enumerate() {
        if completions[t][order - 1] == 0.0 {
            continue;
        }
        for &(e, v) in &tx.senders {
            if rate < 1.0 && mix(mix(mix(cfg.motif_seed, order as u64), t as u64), e as u64) > threshold {
                continue;
            }
            w.txs.push(t);
            w.ents.push(e);
            w.walk(sat_to_btc(v));
            w.ents.pop();
            w.txs.pop();
        }
    }

    let quantities = motif_quantities(order);
    let group = [FeatureGroup::Motif1, FeatureGroup::Motif2, FeatureGroup::Motif3][order - 1];
    let p = format!("m{order}");
    let mut columns = Vec::new();
    for role in ROLES {
        for kind in KINDS {
            columns.push(ColumnSpec::new(format!("{p}_{role}_{kind}_count"), group, format!("{kind} {order}-motifs with the entity as {role}")));
            for q in &quantities {
                let d = describe(q);
                columns.push(ColumnSpec::new(format!("{p}_{role}_{kind}_{q}_mean"), group, format!("mean of {d}")));
                columns.push(ColumnSpec::new(format!("{p}_{role}_{kind}_{q}_std"), group, format!("std of {d}")));
            }
        }
    }
    if order >= 2 {
        columns.push(ColumnSpec::new(format!("{p}_total_src"), group, "motifs with the entity as source"));
        columns.push(ColumnSpec::new(format!("{p}_total_dst"), group, "motifs with the entity as destination"));
        columns.push(ColumnSpec::new(format!("{p}_loop_fraction_src"), group, "loop share of source motifs"));
        columns.push(ColumnSpec::new(format!("{p}_loop_fraction_dst"), group, "loop share of destination motifs"));
        columns.push(ColumnSpec::new(format!("{p}_sampling_rate"), group, "fraction of start points enumerated"));
    }
    if order == 3 {
        columns.push(ColumnSpec::new(format!("{p}_distinct_entities_mean"), group, "mean distinct entities on source motifs"));
    }

    let rows = (0..entities.len())
        .map(|e| {
            let mut row = Vec::with_capacity(columns.len());
            for role in 0..2 {
                for kind in 0..2 {
                    let cell = &w.cells[e][role][kind];
                    row.push(cell.count as f64);
                    if cell.q.is_empty() {
                        row.extend(std::iter::repeat_n(0.0, 2 * quantities.len()));
                    } else {
                        row.extend(cell.q.iter().flat_map(|m| [m.mean, m.std()]));
                    }
                }
            }
            if order >= 2 {
                let c = &w.cells[e];
                let src = (c[0][0].count + c[0][1].count) as f64;
                let dst = (c[1][0].count + c[1][1].count) as f64;
                let frac = |l: u64, t: f64| if t == 0.0 { 0.0 } else { l as f64 / t };
                row.extend([src, dst, frac(c[0][1].count, src), frac(c[1][1].count, dst), rate]);
            }
            if order == 3 {
                row.push(w.distinct[e].mean);
            }
            row
        })
        .collect();
    Ok(FeaturePart { group, entity_ids: entities.ids.clone(), columns, rows })
}
