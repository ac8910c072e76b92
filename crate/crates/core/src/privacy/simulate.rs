use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, Discrete};

use super::{AliasPartition, PrivacyError};
use crate::block_model::CategoryParams;
use crate::distributions::TruncatedPoissonPositive;
use crate::graph_core::{Category, UnionFind};

/// What the tx count on the curve's x axis counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackAxis {
    /// Transactions spent by the attacked entity itself.
    EntityTransactions,
    /// Transactions on the whole chain. The attacked entity takes part in
    /// each with probability `activity_c / entities_per_category`.
    ChainTransactions { entities_per_category: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliasGeometry {
    pub n_aliases: usize,
    pub n_addresses: usize,
}

impl Default for AliasGeometry {
    fn default() -> Self {
        Self { n_aliases: 4, n_addresses: 100 }
    }
}

impl AliasGeometry {
    fn validate(&self) -> Result<(), PrivacyError> {
        if self.n_aliases < 2 || self.n_addresses < self.n_aliases {
            return Err(PrivacyError::InvalidConfig(format!(
                "{} aliases over {} addresses",
                self.n_aliases, self.n_addresses
            )));
        }
        Ok(())
    }

    /// Uniform random composition of the addresses into non-empty aliases.
    pub fn sizes<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut cuts: Vec<usize> = index::sample(rng, self.n_addresses - 1, self.n_aliases - 1)
            .into_iter()
            .map(|c| c + 1)
            .collect();
        cuts.sort_unstable();
        cuts.push(self.n_addresses);
        let mut prev = 0;
        cuts.into_iter()
            .map(|c| {
                let s = c - prev;
                prev = c;
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum AliasSource {
    /// The same partition in every trial.
    Fixed(BTreeMap<Category, AliasPartition>),
    /// Sizes redrawn per trial, shared by all categories within a trial.
    Random(AliasGeometry),
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub n_transactions: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub axis: AttackAxis,
    pub aliases: AliasSource,
}

impl AttackConfig {
    pub fn new(n_transactions: usize, n_trials: usize, seed: u64) -> Self {
        Self {
            n_transactions,
            n_trials,
            seed,
            axis: AttackAxis::EntityTransactions,
            aliases: AliasSource::Random(AliasGeometry::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub category: Category,
    pub tx_count: usize,
    pub mean_fraction: f64,
    pub std_error: f64,
    pub mean_discovered: f64,
    pub discovered_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackCurves {
    pub points: Vec<CurvePoint>,
}

impl AttackCurves {
    pub fn category(&self, c: Category) -> Vec<&CurvePoint> {
        self.points.iter().filter(|p| p.category == c).collect()
    }
}

/// Seed alias gets `1 − p_new`; the rest is split in proportion to alias size.
pub fn random_partition(sizes: &[usize], p_new: f64, lambda_in: f64) -> Result<AliasPartition, PrivacyError> {
    let rest: usize = sizes[1..].iter().sum();
    let mut probs = vec![1.0 - p_new];
    probs.extend(sizes[1..].iter().map(|&s| p_new * s as f64 / rest as f64));
    AliasPartition::from_sizes(sizes, probs, lambda_in)
}

/// Discovered address count after each of `n_tx` transactions.
pub fn simulate_trial<R: Rng + ?Sized>(p: &AliasPartition, n_tx: usize, rng: &mut R) -> Vec<usize> {
    let k = p.aliases.len();
    let sizes = p.sizes();
    let law = TruncatedPoissonPositive::new(p.lambda_in).expect("partition lambda validated");
    let last = p.probs.iter().rposition(|&x| x > 0.0).unwrap_or(k - 1);
    let mut cum = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &x in &p.probs {
        acc += x;
        cum.push(acc);
    }
    let mut uf = UnionFind::new(k);
    let mut touched = vec![false; k];
    let mut out = Vec::with_capacity(n_tx);
    let mut discovered = 0;
    for _ in 0..n_tx {
        touched.iter_mut().for_each(|t| *t = false);
        for _ in 0..law.sample(rng) {
            let u: f64 = rng.random();
            let i = cum.iter().position(|&c| u < c).unwrap_or(last);
            touched[i] = true;
        }
        let mut first = None;
        for i in (0..k).filter(|&i| touched[i]) {
            match first {
                None => first = Some(i),
                Some(f) => {
                    uf.union(f, i);
                }
            }
        }
        if first.is_some() {
            let root = uf.find(0);
            discovered = (1..k).filter(|&i| uf.find(i) == root).map(|i| sizes[i]).sum();
        }
        out.push(discovered);
    }
    out
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Points on the chain axis: all counts up to 100, else 100 evenly spaced.
fn chain_grid(n: usize) -> Vec<usize> {
    if n <= 100 {
        return (1..=n).collect();
    }
    let mut g: Vec<usize> = std::iter::once(1).chain((1..=100).map(|k| (n * k + 50) / 100)).collect();
    g.dedup();
    g
}

/// Binomial(t, q) weights over entity tx counts 0..=cap, tail mass folded into `cap`.
fn binomial_weights(t: usize, q: f64, cap: usize) -> Vec<f64> {
    let law = Binomial::new(q, t as u64).expect("q in [0, 1]");
    let top = cap.min(t);
    let mut w: Vec<f64> = (0..top).map(|m| law.pmf(m as u64)).collect();
    let head: f64 = w.iter().sum();
    w.push((1.0 - head).max(0.0));
    w
}

pub fn simulate_attack(cat_params: &CategoryParams, cfg: &AttackConfig) -> Result<AttackCurves, PrivacyError> {
    if cfg.n_trials == 0 || cfg.n_transactions == 0 {
        return Err(PrivacyError::InvalidConfig("need at least one trial and one transaction".into()));
    }
    let categories: Vec<Category> = match &cfg.aliases {
        AliasSource::Fixed(map) => map.keys().copied().collect(),
        AliasSource::Random(g) => {
            g.validate()?;
            cat_params.categories.keys().copied().collect()
        }
    };

    // Entity tx counts to simulate per trial, and per category the
    // participation rate on the chain axis.
    let mut rates = BTreeMap::new();
    let mut horizon = BTreeMap::new();
    for &c in &categories {
        let (rate, m) = match cfg.axis {
            AttackAxis::EntityTransactions => (1.0, cfg.n_transactions),
            AttackAxis::ChainTransactions { entities_per_category } => {
                if entities_per_category == 0 {
                    return Err(PrivacyError::InvalidConfig("entities_per_category must be positive".into()));
                }
                let spec = cat_params.get(c).ok_or(PrivacyError::MissingCategory(c))?;
                let q = (spec.activity / entities_per_category as f64).clamp(0.0, 1.0);
                let mean = q * cfg.n_transactions as f64;
                let cap = (mean + 12.0 * mean.sqrt() + 20.0).ceil() as usize;
                (q, cap.min(cfg.n_transactions))
            }
        };
        rates.insert(c, rate);
        horizon.insert(c, m);
    }

    // Per category and trial: discovered counts after 0..=m entity txs, and
    // the hidden address count.
    let mut runs: BTreeMap<Category, Vec<(Vec<usize>, usize)>> = BTreeMap::new();
    for trial in 0..cfg.n_trials as u64 {
        let sizes = match &cfg.aliases {
            AliasSource::Random(g) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(trial * 16 + 15);
                Some(g.sizes(&mut rng))
            }
            AliasSource::Fixed(_) => None,
        };
        for (ci, &c) in categories.iter().enumerate() {
            let partition = match (&cfg.aliases, &sizes) {
                (AliasSource::Fixed(map), _) => map[&c].clone(),
                (AliasSource::Random(_), Some(sizes)) => {
                    let spec = cat_params.get(c).ok_or(PrivacyError::MissingCategory(c))?;
                    random_partition(sizes, spec.p_new, spec.lambda_in)?
                }
                _ => unreachable!("sizes drawn for random geometry"),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial * 16 + ci as u64);
            let mut counts = vec![0];
            counts.extend(simulate_trial(&partition, horizon[&c], &mut rng));
            runs.entry(c).or_default().push((counts, partition.hidden_addresses()));
        }
    }

    let mut points = Vec::new();
    for &c in &categories {
        let trials = &runs[&c];
        let frac = |d: f64, hidden: usize| if hidden == 0 { 0.0 } else { d / hidden as f64 };
        match cfg.axis {
            AttackAxis::EntityTransactions => {
                for t in 1..=cfg.n_transactions {
                    let d = trials.iter().map(|(v, _)| v[t] as f64);
                    let f = trials.iter().map(|(v, h)| frac(v[t] as f64, *h));
                    points.push(point(c, t, f, d));
                }
            }
            AttackAxis::ChainTransactions { .. } => {
                // Average each trial's path over the binomial number of entity
                // txs exactly rather than sampling it.
                let cap = horizon[&c];
                for t in chain_grid(cfg.n_transactions) {
                    let w = binomial_weights(t, rates[&c], cap);
                    let expect = |v: &Vec<usize>| w.iter().enumerate().map(|(m, &x)| x * v[m] as f64).sum::<f64>();
                    let d = trials.iter().map(|(v, _)| expect(v));
                    let f = trials.iter().map(|(v, h)| frac(expect(v), *h));
                    points.push(point(c, t, f, d));
                }
            }
        }
    }
    Ok(AttackCurves { points })
}

fn point(
    category: Category,
    tx_count: usize,
    fractions: impl Iterator<Item = f64> + Clone,
    discovered: impl Iterator<Item = f64> + Clone,
) -> CurvePoint {
    let (mean_fraction, std_error) = mean_se(fractions);
    let (mean_discovered, discovered_std_error) = mean_se(discovered);
    CurvePoint { category, tx_count, mean_fraction, std_error, mean_discovered, discovered_std_error }
}

/// Curve CSV: `category,tx_count,mean_fraction,std_error`.
pub fn write_curves<W: Write>(curves: &AttackCurves, out: W) -> Result<(), PrivacyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "tx_count", "mean_fraction", "std_error"])?;
    for p in &curves.points {
        w.write_record([
            p.category.as_str().to_string(),
            p.tx_count.to_string(),
            p.mean_fraction.to_string(),
            p.std_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
