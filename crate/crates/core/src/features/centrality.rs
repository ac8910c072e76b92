use std::collections::{BTreeMap, BTreeSet};

use super::index::{EntitySet, StreamIndex, TxView};
use super::{mean_std, ColumnSpec, FeatureConfig, FeatureError, FeatureGroup, FeaturePart};
use crate::graph_core::{sat_to_btc, Block};

pub const CENTRALITY_METRICS: [&str; 14] = [
    "degree",
    "in_degree",
    "out_degree",
    "in_edges",
    "out_edges",
    "w_in_btc",
    "w_out_btc",
    "w_degree_btc",
    "self_loop_btc",
    "pagerank_undirected",
    "pagerank_directed",
    "eigenvector",
    "clustering",
    "neighbor_mean_degree",
];

/// Entity-to-entity value graph. Edge weights are (transfer count, BTC).
#[derive(Debug, Clone)]
struct Graph {
    out: Vec<BTreeMap<usize, (u64, f64)>>,
    inc: Vec<BTreeMap<usize, (u64, f64)>>,
    self_loop: Vec<f64>,
}

impl Graph {
    fn build<'a>(n: usize, txs: impl Iterator<Item = &'a TxView>) -> Self {
        let mut g = Graph { out: vec![BTreeMap::new(); n], inc: vec![BTreeMap::new(); n], self_loop: vec![0.0; n] };
        for t in txs {
            if t.senders.is_empty() {
                continue;
            }
            let share = t.senders.len() as f64;
            for &(s, _) in &t.senders {
                for &(r, v) in &t.receivers {
                    let btc = sat_to_btc(v) / share;
                    if s == r {
                        g.self_loop[s] += btc;
                        continue;
                    }
                    let e = g.out[s].entry(r).or_default();
                    e.0 += 1;
                    e.1 += btc;
                    let e = g.inc[r].entry(s).or_default();
                    e.0 += 1;
                    e.1 += btc;
                }
            }
        }
        g
    }

    fn neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.out.len())
            .map(|i| self.out[i].keys().chain(self.inc[i].keys()).copied().collect::<BTreeSet<_>>().into_iter().collect())
            .collect()
    }

    fn metrics(&self, cfg: &FeatureConfig) -> Vec<[f64; 14]> {
        let n = self.out.len();
        let nb = self.neighbors();
        let directed: Vec<(usize, usize, f64)> = self
            .out
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().map(move |(&j, &(c, _))| (i, j, c as f64)))
            .collect();
        let undirected: Vec<(usize, usize, f64)> =
            directed.iter().flat_map(|&(i, j, c)| [(i, j, c), (j, i, c)]).collect();
        let pr_d = pagerank(n, &directed, cfg.damping, cfg.max_iter, cfg.tolerance);
        let pr_u = pagerank(n, &undirected, cfg.damping, cfg.max_iter, cfg.tolerance);
        let eig = eigenvector_centrality(&nb, cfg.max_iter, cfg.tolerance);
        let sets: Vec<BTreeSet<usize>> = nb.iter().map(|v| v.iter().copied().collect()).collect();
        (0..n)
            .map(|i| {
                let k = nb[i].len();
                let links = if k < 2 {
                    0
                } else {
                    nb[i].iter().enumerate().map(|(a, &x)| nb[i][a + 1..].iter().filter(|&&y| sets[x].contains(&y)).count()).sum()
                };
                let clustering = if k < 2 { 0.0 } else { 2.0 * links as f64 / (k * (k - 1)) as f64 };
                let nmd = if k == 0 { 0.0 } else { nb[i].iter().map(|&j| nb[j].len() as f64).sum::<f64>() / k as f64 };
                let w_in: f64 = self.inc[i].values().map(|e| e.1).sum();
                let w_out: f64 = self.out[i].values().map(|e| e.1).sum();
                [
                    k as f64,
                    self.inc[i].len() as f64,
                    self.out[i].len() as f64,
                    self.inc[i].values().map(|e| e.0).sum::<u64>() as f64,
                    self.out[i].values().map(|e| e.0).sum::<u64>() as f64,
                    w_in,
                    w_out,
                    w_in + w_out,
                    self.self_loop[i],
                    pr_u[i],
                    pr_d[i],
                    eig[i],
                    clustering,
                    nmd,
                ]
            })
            .collect()
    }
}

/// Weighted PageRank by power iteration; dangling mass is spread uniformly.
pub fn pagerank(n: usize, edges: &[(usize, usize, f64)], damping: f64, max_iter: usize, tol: f64) -> Vec<f64> {
    if n == 0 {
        return vec![];
    }
    let mut out_w = vec![0.0; n];
    for &(i, _, w) in edges {
        out_w[i] += w;
    }
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&i| out_w[i] == 0.0).map(|i| r[i]).sum();
        let base = (1.0 - damping) / n as f64 + damping * dangling / n as f64;
        let mut next = vec![base; n];
        for &(i, j, w) in edges {
            next[j] += damping * r[i] * w / out_w[i];
        }
        let delta: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if delta < tol {
            break;
        }
    }
    r
}

/// Power iteration on A + I over the undirected simple graph, L1-normalized.
/// Without edges every node gets 1/n.
pub fn eigenvector_centrality(neighbors: &[Vec<usize>], max_iter: usize, tol: f64) -> Vec<f64> {
    let n = neighbors.len();
    if n == 0 {
        return vec![];
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next: Vec<f64> = (0..n).map(|i| x[i] + neighbors[i].iter().map(|&j| x[j]).sum::<f64>()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < tol {
            break;
        }
    }
    x
}

pub fn extract_centrality_features(
    blocks: &[Block],
    entities: &EntitySet,
    cfg: &FeatureConfig,
) -> Result<FeaturePart, FeatureError> {
    let index = StreamIndex::build(blocks, entities)?;
    Ok(from_index(&index, entities, cfg))
}

pub(crate) fn from_index(index: &StreamIndex, entities: &EntitySet, cfg: &FeatureConfig) -> FeaturePart {
    let n = entities.len();
    let global = Graph::build(n, index.txs.iter()).metrics(cfg);
    let span = index.max_height - index.min_height + 1;
    let nw = cfg.n_windows.max(1) as u64;
    let windows: Vec<Vec<[f64; 14]>> = (0..nw)
        .map(|w| {
            let txs = index.txs.iter().filter(|t| (t.height - index.min_height) * nw / span == w);
            Graph::build(n, txs).metrics(cfg)
        })
        .collect();

    let mut columns = Vec::new();
    for m in CENTRALITY_METRICS {
        columns.push(ColumnSpec::new(format!("cent_{m}_global"), FeatureGroup::Centrality, format!("{m} on the whole-stream entity graph")));
        columns.push(ColumnSpec::new(format!("cent_{m}_window_mean"), FeatureGroup::Centrality, format!("{m} averaged over {nw} block windows")));
        columns.push(ColumnSpec::new(format!("cent_{m}_window_std"), FeatureGroup::Centrality, format!("{m} std over {nw} block windows")));
    }
    let rows = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(42);
            for k in 0..14 {
                let (m, s) = mean_std(&windows.iter().map(|w| w[i][k]).collect::<Vec<_>>());
                row.extend([global[i][k], m, s]);
            }
            row
        })
        .collect();
    FeaturePart { group: FeatureGroup::Centrality, entity_ids: entities.ids.clone(), columns, rows }
}
