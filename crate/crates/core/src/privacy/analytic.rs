use std::collections::HashSet;

use statrs::function::gamma::ln_gamma;

use super::PrivacyError;
use crate::distributions::TruncatedPoissonPositive;
use crate::graph_core::{AddressId, EntityId};

/// Outcomes enumerated per input count before the exact oracle refuses.
pub const MAX_OUTCOMES_PER_N: u64 = 10_000_000;
pub const MAX_ORACLE_ALIASES: usize = 5;
pub const MAX_ORACLE_LAMBDA: f64 = 6.0;
const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// An entity's address set split into aliases, each spent from with its own
/// probability. Alias 0 is the one the attacker starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasPartition {
    pub entity_id: EntityId,
    pub aliases: Vec<Vec<AddressId>>,
    pub probs: Vec<f64>,
    pub lambda_in: f64,
}

impl AliasPartition {
    pub fn new(
        entity_id: EntityId,
        aliases: Vec<Vec<AddressId>>,
        probs: Vec<f64>,
        lambda_in: f64,
    ) -> Result<Self, PrivacyError> {
        if !(lambda_in > 0.0 && lambda_in.is_finite()) {
            return Err(PrivacyError::InvalidLambda(lambda_in));
        }
        if aliases.is_empty() || aliases.len() != probs.len() {
            return Err(PrivacyError::InvalidPartition(format!(
                "{} aliases but {} probabilities",
                aliases.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(PrivacyError::InvalidPartition(format!("probabilities {probs:?} are not a simplex")));
        }
        let mut seen = HashSet::new();
        for (i, alias) in aliases.iter().enumerate() {
            if alias.is_empty() {
                return Err(PrivacyError::InvalidPartition(format!("alias {i} is empty")));
            }
            for a in alias {
                if !seen.insert(*a) {
                    return Err(PrivacyError::InvalidPartition(format!("address {a} in two aliases")));
                }
            }
        }
        Ok(Self { entity_id, aliases, probs, lambda_in })
    }

    /// Partition with consecutive address ids and the given alias sizes.
    pub fn from_sizes(sizes: &[usize], probs: Vec<f64>, lambda_in: f64) -> Result<Self, PrivacyError> {
        let mut next = 0u64;
        let aliases = sizes
            .iter()
            .map(|&s| {
                let alias = (next..next + s as u64).map(AddressId).collect();
                next += s as u64;
                alias
            })
            .collect();
        Self::new(EntityId(0), aliases, probs, lambda_in)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.aliases.iter().map(Vec::len).collect()
    }

    pub fn total_addresses(&self) -> usize {
        self.aliases.iter().map(Vec::len).sum()
    }

    /// Addresses outside the seed alias: the most the attacker can discover.
    pub fn hidden_addresses(&self) -> usize {
        self.total_addresses() - self.aliases[0].len()
    }
}

/// Closed-form expected number of addresses linked to the seed alias after
/// one transaction.
pub fn expected_discovered(p: &AliasPartition) -> f64 {
    let l = p.lambda_in;
    // (1 − e^{−λ p_1}) / (1 − e^{−λ})
    let seed = (-l * p.probs[0]).exp_m1() / (-l).exp_m1();
    let rest: f64 = p
        .aliases
        .iter()
        .zip(&p.probs)
        .skip(1)
        .map(|(a, &pi)| a.len() as f64 * -(-l * pi).exp_m1())
        .sum();
    seed * rest
}

/// Limit form valid when the seed alias is rarely used.
pub fn expected_discovered_asymptotic(p: &AliasPartition) -> f64 {
    p.lambda_in * p.probs[0] * p.hidden_addresses() as f64
}

fn outcome_count(n: u64, k: usize) -> f64 {
    // C(n + k − 1, k − 1)
    (ln_gamma((n + k as u64) as f64) - ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64)).exp()
}

/// Expected discoveries by direct summation over input counts and every
/// multinomial split of the inputs across aliases.
pub fn brute_force_expected_discovered(p: &AliasPartition, n_cutoff: u64) -> Result<f64, PrivacyError> {
    let k = p.aliases.len();
    let l = p.lambda_in;
    if k > MAX_ORACLE_ALIASES {
        return Err(PrivacyError::TooLarge(format!("{k} aliases exceed {MAX_ORACLE_ALIASES}")));
    }
    if l > MAX_ORACLE_LAMBDA {
        return Err(PrivacyError::TooLarge(format!("lambda {l} exceeds {MAX_ORACLE_LAMBDA}")));
    }
    if (n_cutoff as f64) < l + 20.0 * l.sqrt() {
        return Err(PrivacyError::TooLarge(format!("cutoff {n_cutoff} below lambda + 20 sqrt(lambda)")));
    }
    if outcome_count(n_cutoff, k) > MAX_OUTCOMES_PER_N as f64 {
        return Err(PrivacyError::TooLarge(format!("more than {MAX_OUTCOMES_PER_N} outcomes at n = {n_cutoff}")));
    }
    let law = TruncatedPoissonPositive::new(l).map_err(|_| PrivacyError::InvalidLambda(l))?;
    let ln_fact: Vec<f64> = (0..=n_cutoff).map(|i| ln_gamma(i as f64 + 1.0)).collect();
    let ln_p: Vec<f64> = p.probs.iter().map(|&x| x.ln()).collect();
    let sizes: Vec<f64> = p.sizes().iter().map(|&s| s as f64).collect();

    let mut total = 0.0;
    let mut counts = vec![0u64; k];
    for n in 1..=n_cutoff {
        let mut inner = 0.0;
        enumerate(0, n, &mut counts, &mut |c: &[u64]| {
            let mut lp = ln_fact[n as usize];
            for i in 0..k {
                if c[i] > 0 {
                    if p.probs[i] == 0.0 {
                        return;
                    }
                    lp += c[i] as f64 * ln_p[i];
                }
                lp -= ln_fact[c[i] as usize];
            }
            if c[0] == 0 {
                return;
            }
            let d: f64 = (1..k).filter(|&i| c[i] > 0).map(|i| sizes[i]).sum();
            inner += d * lp.exp();
        });
        total += law.pmf(n) * inner;
    }
    Ok(total)
}

/// Visits every vector of non-negative counts summing to `left` over the
/// positions `i..`.
fn enumerate(i: usize, left: u64, counts: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
    if i + 1 == counts.len() {
        counts[i] = left;
        visit(counts);
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        enumerate(i + 1, left - c, counts, visit);
    }
}
