use std::collections::BTreeMap;

use rand::Rng;

use super::DistError;

const GOLDEN_TOLERANCE: f64 = 1e-8;
const P_FLOOR: f64 = 1e-9;

/// Geometric law on {1, 2, ...} with success probability `p`, optionally
/// renormalized onto {1..k_max}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedGeometric {
    p: f64,
    k_max: Option<u64>,
}

impl BoundedGeometric {
    pub fn new(p: f64, k_max: Option<u64>) -> Result<Self, DistError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(DistError::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
        }
        if k_max == Some(0) {
            return Err(DistError::InvalidParameter("k_max must be at least 1".into()));
        }
        Ok(Self { p, k_max })
    }

    pub fn unbounded(p: f64) -> Result<Self, DistError> {
        Self::new(p, None)
    }

    /// Probability mass kept by the truncation, 1 − (1 − p)^k_max.
    fn retained_mass(&self) -> f64 {
        match self.k_max {
            None => 1.0,
            Some(k) => -(k as f64 * (-self.p).ln_1p()).exp_m1(),
        }
    }

    pub fn pmf(&self, u: u64) -> f64 {
        if u == 0 || self.k_max.is_some_and(|k| u > k) {
            return 0.0;
        }
        if self.p == 1.0 {
            return if u == 1 { 1.0 } else { 0.0 };
        }
        self.p * ((u - 1) as f64 * (-self.p).ln_1p()).exp() / self.retained_mass()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.p == 1.0 || self.k_max == Some(1) {
            return 1;
        }
        let ln_q = (-self.p).ln_1p();
        let u: f64 = rng.random();
        let x = (-(u * self.retained_mass())).ln_1p() / ln_q;
        let n = (x.ceil() as u64).max(1);
        match self.k_max {
            Some(k) => n.min(k),
            None => n,
        }
    }
}

pub fn bgeom_sample<R: Rng + ?Sized>(p: f64, k_max: u64, rng: &mut R) -> Result<u64, DistError> {
    Ok(BoundedGeometric::new(p, Some(k_max))?.sample(rng))
}

/// Log-likelihood of aggregated `(u, k_max) -> count` observations.
fn log_likelihood(p: f64, counts: &BTreeMap<(u64, u64), u64>) -> f64 {
    let ln_q = (-p).ln_1p();
    counts
        .iter()
        .map(|(&(u, k), &c)| {
            let tail = if u > 1 { (u - 1) as f64 * ln_q } else { 0.0 };
            let norm = (-(k as f64 * ln_q).exp_m1()).ln();
            c as f64 * (p.ln() + tail - norm)
        })
        .sum()
}

/// MLE of `p` from draws each carrying its own support bound.
///
/// Truncation removes the closed form, so the likelihood is maximized by
/// golden-section search over (0, 1]; it is unimodal in `p`. Samples with
/// `k_max == 1` carry no information and are skipped. If nothing informative
/// remains, or every informative draw equals 1, the MLE is `p = 1`.
pub fn bgeom_mle(samples: &[(u64, u64)]) -> Result<f64, DistError> {
    let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for &(u, k) in samples {
        *counts.entry((u, k)).or_default() += 1;
    }
    bgeom_mle_counts(&counts)
}

/// [`bgeom_mle`] over aggregated `(u, k_max) -> count` observations.
pub fn bgeom_mle_counts(observed: &BTreeMap<(u64, u64), u64>) -> Result<f64, DistError> {
    if observed.values().all(|&c| c == 0) {
        return Err(DistError::EmptySample);
    }
    let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for (&(u, k), &c) in observed {
        if u == 0 || u > k {
            return Err(DistError::OutOfRange(format!("draw {u} outside support 1..={k}")));
        }
        if k > 1 && c > 0 {
            counts.insert((u, k), c);
        }
    }
    if counts.keys().all(|&(u, _)| u == 1) {
        return Ok(1.0);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (P_FLOOR, 1.0 - P_FLOOR);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (log_likelihood(c, &counts), log_likelihood(d, &counts));
    while b - a > GOLDEN_TOLERANCE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = log_likelihood(c, &counts);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = log_likelihood(d, &counts);
        }
    }
    Ok(0.5 * (a + b))
}

/// Closed-form MLE of the unbounded geometric law: n / Σu.
pub fn geom_mle(samples: &[u64]) -> Result<f64, DistError> {
    if samples.is_empty() {
        return Err(DistError::EmptySample);
    }
    if samples.contains(&0) {
        return Err(DistError::OutOfRange("geometric draws start at 1".into()));
    }
    Ok(samples.len() as f64 / samples.iter().sum::<u64>() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pmf_normalizes() {
        for &(p, k) in &[(0.92, Some(10)), (0.1, Some(3)), (0.67, None), (0.05, None), (1.0, Some(4))] {
            let d = BoundedGeometric::new(p, k).unwrap();
            let upper = k.unwrap_or(2_000);
            let total: f64 = (1..=upper).map(|u| d.pmf(u)).sum();
            assert!((total - 1.0).abs() < 1e-10, "p={p} k={k:?}: {total}");
        }
    }

    #[test]
    fn point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let always_one = BoundedGeometric::unbounded(1.0).unwrap();
        assert!((0..1000).all(|_| always_one.sample(&mut rng) == 1));
        assert!((0..1000).all(|_| bgeom_sample(0.01, 1, &mut rng).unwrap() == 1));
    }

    #[test]
    fn samples_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = BoundedGeometric::new(0.05, Some(4)).unwrap();
        let mut hist = [0u64; 5];
        for _ in 0..40_000 {
            let u = d.sample(&mut rng);
            assert!((1..=4).contains(&u));
            hist[u as usize] += 1;
        }
        for u in 1..=4u64 {
            let freq = hist[u as usize] as f64 / 40_000.0;
            let p = d.pmf(u);
            assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / 40_000.0).sqrt() + 1e-9);
        }
    }

    #[test]
    fn bounded_mle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = BoundedGeometric::new(0.92, Some(10)).unwrap();
        let samples: Vec<(u64, u64)> = (0..100_000).map(|_| (d.sample(&mut rng), 10)).collect();
        let p = bgeom_mle(&samples).unwrap();
        assert!((p - 0.92).abs() < 0.01, "{p}");
    }

    #[test]
    fn bounded_mle_with_mixed_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let samples: Vec<(u64, u64)> = (0..100_000)
            .map(|i| {
                let k = 1 + (i % 4) as u64;
                (bgeom_sample(0.3, k, &mut rng).unwrap(), k)
            })
            .collect();
        let p = bgeom_mle(&samples).unwrap();
        assert!((p - 0.3).abs() < 0.01, "{p}");
    }

    #[test]
    fn mle_edge_cases() {
        assert!(bgeom_mle(&[]).is_err());
        assert_eq!(bgeom_mle(&[(1, 5), (1, 1)]).unwrap(), 1.0);
        assert_eq!(bgeom_mle(&[(1, 1)]).unwrap(), 1.0);
        assert!(bgeom_mle(&[(3, 2)]).is_err());
        assert_eq!(geom_mle(&[1, 1, 1, 1]).unwrap(), 1.0);
        assert!((geom_mle(&[1, 3]).unwrap() - 0.5).abs() < 1e-15);
    }
}
