use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::graph_core::Category;

/// Rows above which split search switches from exact thresholds to bins.
pub const EXACT_SPLIT_LIMIT: usize = 10_000;
pub const HISTOGRAM_BINS: usize = 64;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { learning_rate: 0.18, n_rounds: 200, max_depth: 6, min_leaf: 20, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, gain: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub classes: Vec<Category>,
    pub columns: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    /// Prior log-odds per class.
    pub base_scores: Vec<f64>,
    /// One additive ensemble per class, one-vs-all.
    pub trees: Vec<Vec<Tree>>,
    /// Summed binary log-loss over classes before training and after each round.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.trees
            .iter()
            .zip(&self.base_scores)
            .map(|(ts, b)| b + ts.iter().map(|t| t.predict(x)).sum::<f64>())
            .collect()
    }

    /// Softmax of the class scores.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scores(x);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    /// Highest-scoring class; ties go to the earlier class.
    pub fn predict(&self, x: &[f64]) -> Category {
        let s = self.scores(x);
        let mut best = 0;
        for (i, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifierError> {
        serde_json::from_str(s).map_err(|e| ClassifierError::Model(e.to_string()))
    }
}

/// Per-feature cut points; value `x` falls in bin `#{cuts < x}`.
struct Binned {
    cuts: Vec<Vec<f64>>,
    /// bins[feature][row]
    bins: Vec<Vec<u16>>,
}

fn bin_features(rows: &[Vec<f64>], n_features: usize) -> Binned {
    let n = rows.len();
    let mut cuts = Vec::with_capacity(n_features);
    let mut bins = Vec::with_capacity(n_features);
    for f in 0..n_features {
        let mut v: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let c: Vec<f64> = if n <= EXACT_SPLIT_LIMIT && v.len() <= u16::MAX as usize {
            v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
        } else {
            let mut all: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            all.sort_by(f64::total_cmp);
            let mut q: Vec<f64> = (1..HISTOGRAM_BINS).map(|i| all[i * n / HISTOGRAM_BINS]).collect();
            q.dedup();
            // The top value would leave the last bin empty.
            q.retain(|&x| x < *all.last().unwrap());
            q
        };
        bins.push(rows.iter().map(|r| c.partition_point(|&cut| cut < r[f]) as u16).collect());
        cuts.push(c);
    }
    Binned { cuts, bins }
}

struct Grower<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl Grower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(g, h) });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(best) = self.best_split(&rows, g, h) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| (self.binned.bins[best.feature][r] as usize) <= best.bin);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: self.binned.cuts[best.feature][best.bin],
            gain: best.gain,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<BestSplit> {
        let parent = self.score(g, h);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        for (f, cuts) in self.binned.cuts.iter().enumerate() {
            if cuts.is_empty() {
                continue;
            }
            let nb = cuts.len() + 1;
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            let mut hc = vec![0usize; nb];
            for &r in rows {
                let b = self.binned.bins[f][r] as usize;
                hg[b] += self.grad[r];
                hh[b] += self.hess[r];
                hc[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                cl += hc[b];
                let cr = rows.len() - cl;
                if cl < min_leaf {
                    continue;
                }
                if cr < min_leaf {
                    break;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(g - gl, h - hl) - parent);
                if gain > 1e-12 && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    best = Some(BestSplit { gain, feature: f, bin: b });
                }
            }
        }
        best
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary log-loss written in terms of the margin, stable for large |s|.
fn log_loss(scores: &[f64], y: &[f64]) -> f64 {
    let softplus = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    scores.iter().zip(y).map(|(&s, &t)| softplus(s) - t * s).sum::<f64>() / scores.len() as f64
}

/// One-vs-all boosting with Newton leaves. Each round's tree is shrunk by
/// the learning rate and halved further until the class loss does not rise.
pub fn train_gbdt(train: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel, ClassifierError> {
    if train.rows.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if !(params.learning_rate > 0.0) || params.max_depth == 0 {
        return Err(ClassifierError::InvalidParams(format!("{params:?}")));
    }
    let mut classes = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifierError::SingleClass(classes[0]));
    }
    let n = train.rows.len();
    let n_features = train.columns.len();
    let binned = bin_features(&train.rows, n_features);

    let mut base_scores = Vec::new();
    let mut ensembles = Vec::new();
    let mut losses: Vec<Vec<f64>> = Vec::new();
    for &c in &classes {
        let y: Vec<f64> = train.labels.iter().map(|&l| (l == c) as u8 as f64).collect();
        let p0 = y.iter().sum::<f64>() / n as f64;
        let base = (p0 / (1.0 - p0)).ln();
        let mut f = vec![base; n];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut loss = log_loss(&f, &y);
        let mut history = vec![loss];
        for _ in 0..params.n_rounds {
            let p: Vec<f64> = f.iter().map(|&s| sigmoid(s)).collect();
            let grad: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
            let hess: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
            let mut grower = Grower { binned: &binned, grad: &grad, hess: &hess, params, nodes: Vec::new() };
            grower.grow((0..n).collect(), 0);
            let mut tree = Tree { nodes: grower.nodes };
            let raw: Vec<f64> = train.rows.iter().map(|x| tree.predict(x)).collect();
            let mut step = params.learning_rate;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> = f.iter().zip(&raw).map(|(s, d)| s + step * d).collect();
                let l = log_loss(&cand, &y);
                if l <= loss {
                    accepted = Some((cand, l));
                    break;
                }
                step /= 2.0;
            }
            match accepted {
                Some((cand, l)) => {
                    tree.scale(step);
                    f = cand;
                    loss = l;
                }
                None => tree = Tree { nodes: vec![Node::Leaf { value: 0.0 }] },
            }
            trees.push(tree);
            history.push(loss);
        }
        base_scores.push(base);
        ensembles.push(trees);
        losses.push(history);
    }
    let train_loss = (0..=params.n_rounds).map(|r| losses.iter().map(|h| h[r]).sum()).collect();
    Ok(GbdtModel {
        params: *params,
        classes,
        columns: train.columns.iter().map(|c| c.name.clone()).collect(),
        groups: train.columns.iter().map(|c| c.group).collect(),
        base_scores,
        trees: ensembles,
        train_loss,
    })
}
