//! Samplers, probability functions and maximum-likelihood estimators for the
//! distribution families of the block model.

mod gaussian;
mod geometric;
mod poisson;
mod weighted;

use thiserror::Error;

pub use gaussian::{tgauss_fit, tgauss_sample, TruncatedGaussian};
pub use geometric::{bgeom_mle, bgeom_mle_counts, bgeom_sample, geom_mle, BoundedGeometric};
pub use poisson::{
    poisson_mle, poisson_sample, tpois_lambda_for_mean, tpois_mean, tpois_mle, tpois_pmf,
    tpois_sample, TruncatedPoissonPositive, DEGENERATE_LAMBDA,
};
pub use weighted::{weighted_pick, DynamicWeights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty sample")]
    EmptySample,
    #[error("out of range: {0}")]
    OutOfRange(String),
}

/// Closed-form binomial MLE Σ successes / Σ trials.
pub fn binom_ratio_mle(successes: u64, trials: u64) -> Result<f64, DistError> {
    if trials == 0 {
        return Err(DistError::EmptySample);
    }
    if successes > trials {
        return Err(DistError::OutOfRange(format!("{successes} successes in {trials} trials")));
    }
    Ok(successes as f64 / trials as f64)
}

/// Per-stream seed derivation: `master ^ stream`.
pub fn stream_seed(master: u64, stream: u64) -> u64 {
    master ^ stream
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    #[test]
    fn ratio_mle() {
        assert_eq!(binom_ratio_mle(26, 100).unwrap(), 0.26);
        assert_eq!(binom_ratio_mle(0, 7).unwrap(), 0.0);
        assert!(binom_ratio_mle(1, 0).is_err());
        assert!(binom_ratio_mle(3, 2).is_err());
    }

    #[test]
    fn ratio_mle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut s, mut t) = (0, 0);
        for _ in 0..10_000 {
            let o = tpois_sample(1.21, &mut rng).unwrap();
            s += Binomial::new(o, 0.47).unwrap().sample(&mut rng);
            t += o;
        }
        assert!((binom_ratio_mle(s, t).unwrap() - 0.47).abs() < 0.01);
    }

    #[test]
    fn seeded_streams_are_identical() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| tpois_sample(2.99, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(stream_seed(7, 1)), draw(stream_seed(7, 1)));
        assert_ne!(draw(stream_seed(7, 1)), draw(stream_seed(7, 2)));
    }
}
