//! Reproducible Monte-Carlo estimation of supremum tail and orthant
//! probabilities for multivariate normal vectors.

use crate::error::Result;
use crate::matrix::{cholesky, CorrelationMatrix};
use crate::rng::{sample_rng, Stream};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Monte-Carlo estimate of a probability, with its binomial standard error
/// and a 99.7% (three sigma) normal-approximation interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub n_samples: u64,
    pub std_err: f64,
    pub seed: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MCEstimate {
    pub fn from_count(hits: u64, n_samples: u64, seed: u64) -> Self {
        let p_hat = hits as f64 / n_samples as f64;
        let std_err = (p_hat * (1.0 - p_hat) / n_samples as f64).sqrt();
        MCEstimate {
            p_hat,
            n_samples,
            std_err,
            seed,
            ci_low: (p_hat - 3.0 * std_err).max(0.0),
            ci_high: (p_hat + 3.0 * std_err).min(1.0),
        }
    }
}

/// Estimates `P(max_i Z_i > u)` for `Z ~ N(0, m)`.
///
/// Samples are `L g` with `L` the Cholesky factor and `g` drawn from the
/// counter-based per-sample stream, so the estimate is identical for any
/// worker count.
pub fn mc_sup_tail(
    m: &CorrelationMatrix,
    u: f64,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    let f = cholesky(m)?;
    let n = m.n();
    let hits = (0..n_samples)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |g, idx| {
                let mut rng = sample_rng(seed, Stream::GaussianMc, idx);
                for gi in g.iter_mut() {
                    *gi = rng.sample(StandardNormal);
                }
                let mut exceeded = false;
                for i in 0..n {
                    let row = f.row(i);
                    let mut acc = 0.0;
                    for (l, gv) in row.iter().zip(&g[..=i]) {
                        acc += l * gv;
                    }
                    if acc > u {
                        exceeded = true;
                        break;
                    }
                }
                exceeded as u64
            },
        )
        .sum();
    Ok(MCEstimate::from_count(hits, n_samples, seed))
}

/// Estimates the orthant probability `P(Z_i <= thresholds_i for all i)`.
pub fn mc_orthant(
    m: &CorrelationMatrix,
    thresholds: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    assert_eq!(thresholds.len(), m.n());
    let f = cholesky(m)?;
    let n = m.n();
    let hits = (0..n_samples)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |g, idx| {
                let mut rng = sample_rng(seed, Stream::GaussianMc, idx);
                for gi in g.iter_mut() {
                    *gi = rng.sample(StandardNormal);
                }
                let mut inside = true;
                for i in 0..n {
                    let row = f.row(i);
                    let mut acc = 0.0;
                    for (l, gv) in row.iter().zip(&g[..=i]) {
                        acc += l * gv;
                    }
                    if acc > thresholds[i] {
                        inside = false;
                        break;
                    }
                }
                inside as u64
            },
        )
        .sum();
    Ok(MCEstimate::from_count(hits, n_samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_half() {
        let m = CorrelationMatrix::identity(1);
        let est = mc_sup_tail(&m, 0.0, 200_000, 1).unwrap();
        assert!(
            (est.p_hat - 0.5).abs() <= 4.0 * est.std_err,
            "p_hat = {}",
            est.p_hat
        );
        assert!(est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);
        let expect = (est.p_hat * (1.0 - est.p_hat) / est.n_samples as f64).sqrt();
        assert_eq!(est.std_err, expect);
    }

    #[test]
    fn two_dimensional_independent() {
        let m = CorrelationMatrix::identity(2);
        let est = mc_sup_tail(&m, 0.0, 200_000, 2).unwrap();
        assert!(
            (est.p_hat - 0.75).abs() <= 4.0 * est.std_err,
            "p_hat = {}",
            est.p_hat
        );
    }

    #[test]
    fn equicorrelated_pair_matches_oracle_complement() {
        let m = CorrelationMatrix::equicorrelated(2, 0.5).unwrap();
        let est = mc_sup_tail(&m, 1.0, 300_000, 4).unwrap();
        let orthant = crate::orthant::orthant_prob_oracle(&m, &[1.0, 1.0]).unwrap();
        assert!(
            (est.p_hat - (1.0 - orthant)).abs() <= 4.0 * est.std_err,
            "mc {} vs complement {}",
            est.p_hat,
            1.0 - orthant
        );
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let m = CorrelationMatrix::equicorrelated(4, 0.3).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_sup_tail(&m, 1.0, 50_000, 99).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| mc_sup_tail(&m, 1.0, 50_000, 99).unwrap());
        assert_eq!(serial.p_hat, parallel.p_hat);
        assert_eq!(serial.std_err, parallel.std_err);
    }

    #[test]
    fn propagates_cholesky_error() {
        let m = CorrelationMatrix::equicorrelated(2, 1.0).unwrap();
        assert!(mc_sup_tail(&m, 0.0, 10, 0).is_err());
    }
}
