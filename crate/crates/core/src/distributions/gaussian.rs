use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::DistError;

/// Gaussian renormalized onto a closed interval `[a, b]`.
///
/// `sigma == 0` is accepted as the point mass at `mu` clamped into the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussian {
    mu: f64,
    sigma: f64,
    a: f64,
    b: f64,
}

impl TruncatedGaussian {
    pub fn new(mu: f64, sigma: f64, a: f64, b: f64) -> Result<Self, DistError> {
        if !(a < b) {
            return Err(DistError::InvalidParameter(format!("empty interval [{a}, {b}]")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(DistError::InvalidParameter(format!("invalid mu {mu} / sigma {sigma}")));
        }
        Ok(Self { mu, sigma, a, b })
    }

    fn std_bounds(&self) -> (f64, f64) {
        ((self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.a || x > self.b || self.sigma == 0.0 {
            return 0.0;
        }
        let std = Normal::standard();
        let (mut alpha, mut beta) = self.std_bounds();
        let mut z = (x - self.mu) / self.sigma;
        // Work in the lower tail, where the CDF keeps its relative precision.
        if alpha > 0.0 {
            (alpha, beta, z) = (-beta, -alpha, -z);
        }
        if beta > -5.0 {
            return std.pdf(z) / (self.sigma * (std.cdf(beta) - std.cdf(alpha)));
        }
        // Deep lower tail: scale everything by phi(beta) so nothing underflows.
        let num = (-0.5 * (z - beta) * (z + beta)).exp();
        let den = mills_ratio(-beta) - mills_ratio(-alpha) * (-0.5 * (alpha - beta) * (alpha + beta)).exp();
        num / (self.sigma * den)
    }

    /// Inverse-CDF sampling. The interval is reflected into the lower tail
    /// first so that both CDF values stay representable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.clamp(self.a, self.b);
        }
        let reflect = self.a > self.mu;
        let (mu, a, b) = if reflect {
            (-self.mu, -self.b, -self.a)
        } else {
            (self.mu, self.a, self.b)
        };
        let std = Normal::standard();
        let lo = std.cdf((a - mu) / self.sigma);
        let hi = std.cdf((b - mu) / self.sigma);
        let x = if hi - lo > 0.0 {
            let u = lo + rng.random::<f64>() * (hi - lo);
            (mu + self.sigma * std.inverse_cdf(u)).clamp(a, b)
        } else {
            // All mass beyond numerical reach: nearest endpoint.
            mu.clamp(a, b)
        };
        if reflect {
            -x
        } else {
            x
        }
    }
}

/// Mills ratio (1 - Phi(x)) / phi(x) for x >= 5, by continued fraction.
fn mills_ratio(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=200).rev() {
        f = x + k as f64 / f;
    }
    1.0 / f
}

pub fn tgauss_sample<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<f64, DistError> {
    Ok(TruncatedGaussian::new(mu, sigma, a, b)?.sample(rng))
}

/// Pooled method-of-moments fit `(mean, population std)`.
///
/// Per-sample truncation is ignored; the approximation holds when the
/// interval is wide compared to sigma.
pub fn tgauss_fit(samples: &[f64]) -> Result<(f64, f64), DistError> {
    if samples.is_empty() {
        return Err(DistError::EmptySample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}
