use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use super::DistError;

/// Returned by [`tpois_mle`] when the sample mean is at most one: every
/// observation sits at the lower bound and the rate collapses to zero.
pub const DEGENERATE_LAMBDA: f64 = 0.0;

const LAMBDA_BRACKET: (f64, f64) = (1e-9, 700.0);
const ROOT_TOLERANCE: f64 = 1e-10;

/// Poisson law conditioned on being at least one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPoissonPositive {
    lambda: f64,
}

/// ln(e^λ − 1) without overflow for large λ or cancellation for small λ.
fn ln_expm1(lambda: f64) -> f64 {
    if lambda > 30.0 {
        lambda + (-(-lambda).exp_m1()).ln()
    } else {
        lambda.exp_m1().ln()
    }
}

impl TruncatedPoissonPositive {
    pub fn new(lambda: f64) -> Result<Self, DistError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(DistError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        n as f64 * self.lambda.ln() - ln_gamma(n as f64 + 1.0) - ln_expm1(self.lambda)
    }

    pub fn pmf(&self, n: u64) -> f64 {
        self.ln_pmf(n).exp()
    }

    pub fn mean(&self) -> f64 {
        tpois_mean(self.lambda)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        m * (1.0 + self.lambda - m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let lambda = self.lambda;
        if lambda > 10.0 {
            // Rejection of zeros; acceptance is at least 1 − e^{-10}.
            let poisson = Poisson::new(lambda).expect("validated lambda");
            loop {
                let n = poisson.sample(rng) as u64;
                if n >= 1 {
                    return n;
                }
            }
        }
        // Sequential inversion from n = 1.
        let u: f64 = rng.random();
        let mut p = lambda / lambda.exp_m1();
        let mut cdf = p;
        let mut n = 1u64;
        while u > cdf && n < 1_000 {
            n += 1;
            p *= lambda / n as f64;
            cdf += p;
        }
        n
    }
}

/// Mean of the zero-truncated Poisson law, λ / (1 − e^{−λ}).
pub fn tpois_mean(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    lambda / -(-lambda).exp_m1()
}

pub fn tpois_pmf(lambda: f64, n: u64) -> Result<f64, DistError> {
    Ok(TruncatedPoissonPositive::new(lambda)?.pmf(n))
}

pub fn tpois_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, DistError> {
    Ok(TruncatedPoissonPositive::new(lambda)?.sample(rng))
}

/// Inverts the mean map by bisection on [1e−9, 700].
pub fn tpois_lambda_for_mean(mean: f64) -> Result<f64, DistError> {
    if mean <= 1.0 {
        return Ok(DEGENERATE_LAMBDA);
    }
    let f = |l: f64| tpois_mean(l) - mean;
    let (mut lo, mut hi) = LAMBDA_BRACKET;
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) < 0.0 {
        return Err(DistError::OutOfRange(format!("sample mean {mean} exceeds the lambda bracket")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < ROOT_TOLERANCE {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximum-likelihood rate of a zero-truncated Poisson sample.
///
/// The score equation reduces to matching the truncated mean to the sample
/// mean. A sample mean of one (all ones) returns [`DEGENERATE_LAMBDA`].
pub fn tpois_mle(sample: &[u64]) -> Result<f64, DistError> {
    if sample.is_empty() {
        return Err(DistError::EmptySample);
    }
    if let Some(bad) = sample.iter().find(|&&n| n == 0) {
        return Err(DistError::OutOfRange(format!("zero-truncated sample contains {bad}")));
    }
    let mean = sample.iter().sum::<u64>() as f64 / sample.len() as f64;
    tpois_lambda_for_mean(mean)
}

/// Plain Poisson draw; a zero rate yields zero.
pub fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, DistError> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda)
        .map_err(|e| DistError::InvalidParameter(format!("poisson lambda {lambda}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Plain Poisson MLE: the sample mean.
pub fn poisson_mle(sample: &[u64]) -> Result<f64, DistError> {
    if sample.is_empty() {
        return Err(DistError::EmptySample);
    }
    Ok(sample.iter().sum::<u64>() as f64 / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cutoff(lambda: f64) -> u64 {
        (60.0f64).max(lambda + 20.0 * lambda.sqrt()).ceil() as u64
    }

    #[test]
    fn small_lambda_puts_mass_at_one() {
        assert!((tpois_pmf(1e-12, 1).unwrap() - 1.0).abs() < 1e-9);
        assert!(tpois_pmf(1e-12, 2).unwrap() < 1e-9);
    }

    #[test]
    fn pmf_normalizes() {
        for &l in &[1e-6, 0.21, 1.0, 2.99, 21.2, 65.6, 300.0] {
            let d = TruncatedPoissonPositive::new(l).unwrap();
            let total: f64 = (1..=cutoff(l)).map(|n| d.pmf(n)).sum();
            assert!((total - 1.0).abs() < 1e-10, "lambda {l}: {total}");
        }
        let total: f64 = (1..=60).map(|n| tpois_pmf(2.99, n).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_matches_closed_form() {
        // λ^n / (n! (e^λ − 1)) computed directly.
        let l: f64 = 2.99;
        let mut fact = 1.0;
        for n in 1..=10u64 {
            fact *= n as f64;
            let direct = l.powi(n as i32) / (fact * (l.exp() - 1.0));
            assert!((tpois_pmf(l, n).unwrap() - direct).abs() < 1e-14);
        }
        assert_eq!(tpois_pmf(l, 0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive_lambda() {
        assert!(TruncatedPoissonPositive::new(0.0).is_err());
        assert!(TruncatedPoissonPositive::new(-1.0).is_err());
        assert!(TruncatedPoissonPositive::new(f64::NAN).is_err());
    }

    #[test]
    fn empirical_mean_matches_truncated_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = TruncatedPoissonPositive::new(2.99).unwrap();
        let n = 1_000_000;
        let sum: u64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        let se = (d.variance() / n as f64).sqrt();
        // λ/(1 − e^{−λ}) at 2.99 is 3.1484...
        assert!((d.mean() - 3.1484).abs() < 1e-3);
        assert!((mean - d.mean()).abs() < 3.0 * se, "{mean} vs {}", d.mean());
    }

    #[test]
    fn large_lambda_sampler_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = TruncatedPoissonPositive::new(21.2).unwrap();
        let n = 200_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<u64>() as f64 / n as f64;
        assert!((mean - d.mean()).abs() < 3.0 * (d.variance() / n as f64).sqrt());
    }

    #[test]
    fn mle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = TruncatedPoissonPositive::new(2.99).unwrap();
        let sample: Vec<u64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let fit = tpois_mle(&sample).unwrap();
        assert!((fit - 2.99).abs() < 0.05, "{fit}");
    }

    #[test]
    fn mle_degenerate_and_mean_inversion() {
        assert_eq!(tpois_mle(&[1, 1, 1]).unwrap(), DEGENERATE_LAMBDA);
        assert!(tpois_mle(&[]).is_err());
        assert!(tpois_mle(&[0, 2]).is_err());
        let l = tpois_lambda_for_mean(3.148).unwrap();
        assert!((l - 2.99).abs() < 0.01, "{l}");
        assert!((tpois_mean(l) - 3.148).abs() < 1e-9);
    }

    #[test]
    fn plain_poisson_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(poisson_sample(0.0, &mut rng).unwrap(), 0);
        assert!(poisson_sample(-1.0, &mut rng).is_err());
        assert_eq!(poisson_mle(&[1, 2, 3]).unwrap(), 2.0);
    }
}
