//! Deterministic random-instance families for soundness sweeps.
//!
//! Everything here is seeded through the counter-based streams, so a suite
//! spec with fixed seeds reproduces the exact same instances on every run.

use crate::matrix::CorrelationMatrix;
use crate::rng::{sample_rng, Stream};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random positive-definite correlation matrix: `A^T A` for a random square
/// `A` with standard normal entries, normalised to unit diagonal.
pub fn random_psd_correlation(n: usize, seed: u64) -> CorrelationMatrix {
    let mut rng = sample_rng(seed, Stream::InstanceGen, 0);
    loop {
        // 2n rows keep the Gram matrix comfortably away from singular
        let rows = 2 * n;
        let mut a = vec![0.0f64; rows * n];
        for v in a.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut gram = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = (0..rows).map(|k| a[k * n + i] * a[k * n + j]).sum();
            }
        }
        if (0..n).any(|i| gram[i * n + i] <= 1e-8) {
            continue;
        }
        let mut entries = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = gram[i * n + j] / (gram[i * n + i] * gram[j * n + j]).sqrt();
            }
        }
        if let Ok(m) = CorrelationMatrix::from_flat(n, entries) {
            if m.require_no_repeats().is_ok() && m.validate_psd().is_ok() {
                return m;
            }
        }
    }
}

/// A decreasing nonnegative stationary correlation sequence with
/// `r(0) = 1` and `r(1) <= r1_cap`, positive semi-definite by construction.
/// Alternates between two families by seed:
///
/// * geometric `r(k) = r1 rho^{k-1}` with `r1 <= rho`, i.e. a convex
///   combination of the `rho^k` kernel and white noise;
/// * power `r(k) = r1 (2/(1+k))^gamma` with `r1 <= 2^{-gamma}`, a
///   white-noise mixture of the completely monotone kernel `(1+t)^{-gamma}`
///   (itself a mixture of exponentials).
pub fn random_stationary_sequence(seed: u64, r1_cap: f64) -> impl Fn(usize) -> f64 + Clone {
    let mut rng = sample_rng(seed, Stream::InstanceGen, 1);
    let geometric = rng.gen_bool(0.5);
    let rho: f64 = rng.gen_range(0.2..0.95);
    let gamma: f64 = rng.gen_range(0.5..3.0);
    let family_cap = if geometric {
        rho
    } else {
        (2.0f64).powf(-gamma)
    };
    let r1: f64 = rng.gen_range(0.0..r1_cap.min(family_cap));
    move |k: usize| {
        if k == 0 {
            1.0
        } else if geometric {
            r1 * rho.powi(k as i32 - 1)
        } else {
            r1 * (2.0 / (1.0 + k as f64)).powf(gamma)
        }
    }
}

/// Valid `(c, d)` sequences for every pivot of a small random matrix, when
/// they exist: `d_j = 1` and a common `c` value chosen below every margin
/// `r_{j,k} - r_{j,m} r_{k,m}` and every denominator `1 - r_{j,m}^2`.
///
/// Returns `None` when some margin is nonpositive, in which case the matrix
/// admits no such uniform choice and the instance should be redrawn.
pub fn uniform_cd_for(m: &CorrelationMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.n();
    if n < 2 {
        return Some((vec![], vec![]));
    }
    let mut cap = f64::INFINITY;
    for pivot in 2..=n {
        for j in 0..pivot - 1 {
            cap = cap.min(1.0 - m.get(j, pivot - 1).powi(2));
            for k in j + 1..pivot - 1 {
                let margin =
                    m.get(j, k) - m.get(j, pivot - 1) * m.get(k, pivot - 1);
                cap = cap.min(margin);
            }
        }
    }
    if cap <= 1e-3 {
        return None;
    }
    let c = cap / 2.0;
    Some((vec![c; n - 1], vec![1.0; n - 1]))
}
