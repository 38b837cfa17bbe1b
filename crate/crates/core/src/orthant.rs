//! Exact low-dimension orthant probabilities by adaptive quadrature.
//!
//! `P(Z <= thresholds)` for an `n <= 3` multivariate normal vector, used as
//! the ground-truth oracle for every bound the crate produces. Dimension one
//! is the normal CDF; dimension two reduces to a single integral by
//! conditioning on the first coordinate; dimension three nests that
//! reduction once more. Quadrature cost grows exponentially with dimension,
//! and n <= 3 covers all acceptance tests, so larger n is rejected.

use crate::error::{Error, Result};
use crate::matrix::CorrelationMatrix;
use crate::special::{std_normal_cdf, std_normal_pdf};

/// Integration window: the standard normal mass outside [-8.6, 8.6] is below
/// 1e-17, far under the oracle's 1e-8 error budget.
const CUT: f64 = 8.6;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
        + adaptive_step(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    adaptive_step(&f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `P(Z1 <= u1, Z2 <= u2)` for standard normals with correlation `r`,
/// via conditioning on the first coordinate.
fn bivariate_orthant(u1: f64, u2: f64, r: f64, tol: f64) -> f64 {
    if u1 <= -CUT || u2 <= -CUT {
        return 0.0;
    }
    let s = (1.0 - r * r).sqrt();
    let hi = u1.min(CUT);
    integrate(
        |x| std_normal_pdf(x) * std_normal_cdf((u2 - r * x) / s),
        -CUT,
        hi,
        tol,
    )
}

/// Exact orthant probability `P(Z_j <= thresholds_j for all j)` for an
/// `n <= 3` strictly positive-definite correlation matrix. Absolute error
/// at most 1e-8.
pub fn orthant_prob_oracle(m: &CorrelationMatrix, thresholds: &[f64]) -> Result<f64> {
    let n = m.n();
    if n > 3 {
        return Err(Error::UnsupportedDimension { n });
    }
    if thresholds.len() != n {
        return Err(Error::Config(format!(
            "expected {n} thresholds, got {}",
            thresholds.len()
        )));
    }
    m.validate_psd()?;
    match n {
        1 => Ok(std_normal_cdf(thresholds[0])),
        2 => Ok(bivariate_orthant(
            thresholds[0],
            thresholds[1],
            m.get(0, 1),
            1e-10,
        )
        .clamp(0.0, 1.0)),
        _ => {
            let (u1, u2, u3) = (thresholds[0], thresholds[1], thresholds[2]);
            if u1 <= -CUT || u2 <= -CUT || u3 <= -CUT {
                return Ok(0.0);
            }
            let r12 = m.get(0, 1);
            let r13 = m.get(0, 2);
            let r23 = m.get(1, 2);
            let s2 = (1.0 - r12 * r12).sqrt();
            let s3 = (1.0 - r13 * r13).sqrt();
            // correlation of (Z2, Z3) given Z1 = x
            let rho = ((r23 - r12 * r13) / (s2 * s3)).clamp(-1.0 + 1e-14, 1.0 - 1e-14);
            let hi = u1.min(CUT);
            let p = integrate(
                |x| {
                    std_normal_pdf(x)
                        * bivariate_orthant((u2 - r12 * x) / s2, (u3 - r13 * x) / s3, rho, 1e-11)
                },
                -CUT,
                hi,
                1e-10,
            );
            Ok(p.clamp(0.0, 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_psd_correlation;
    use crate::mc::mc_sup_tail;
    use crate::rng::{sample_rng, Stream};
    use rand::Rng;

    #[test]
    fn matches_cdf_in_dimension_one() {
        let m = CorrelationMatrix::identity(1);
        assert_eq!(orthant_prob_oracle(&m, &[0.0]).unwrap(), 0.5);
        for x in [-3.0, -1.0, 0.7, 2.5] {
            let p = orthant_prob_oracle(&m, &[x]).unwrap();
            assert!((p - std_normal_cdf(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn independent_quadrant() {
        let m = CorrelationMatrix::identity(2);
        let p = orthant_prob_oracle(&m, &[0.0, 0.0]).unwrap();
        assert!((p - 0.25).abs() <= 1e-9, "p = {p}");
    }

    #[test]
    fn classical_orthant_identity() {
        // P(Z1 <= 0, Z2 <= 0) = 1/4 + arcsin(r) / (2 pi); r = 1/2 gives 1/3
        let m = CorrelationMatrix::equicorrelated(2, 0.5).unwrap();
        let p = orthant_prob_oracle(&m, &[0.0, 0.0]).unwrap();
        assert!((p - 1.0 / 3.0).abs() <= 1e-8, "p = {p}");

        for seed in 0..40u64 {
            let mut rng = sample_rng(seed, Stream::InstanceGen, 9);
            let r: f64 = rng.gen_range(-0.95..0.95);
            let m = CorrelationMatrix::equicorrelated(2, r).unwrap();
            let p = orthant_prob_oracle(&m, &[0.0, 0.0]).unwrap();
            let exact = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
            assert!((p - exact).abs() <= 1e-8, "r = {r}: {p} vs {exact}");
        }
    }

    #[test]
    fn saturated_threshold_marginalises() {
        let m = CorrelationMatrix::equicorrelated(2, 0.7).unwrap();
        let p = orthant_prob_oracle(&m, &[50.0, 1.3]).unwrap();
        assert!((p - std_normal_cdf(1.3)).abs() <= 1e-9);
    }

    #[test]
    fn trivariate_factorises_when_last_coordinate_independent() {
        let m = CorrelationMatrix::from_rows(vec![
            vec![1.0, 0.6, 0.0],
            vec![0.6, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p3 = orthant_prob_oracle(&m, &[0.4, -0.2, 1.1]).unwrap();
        let m2 = CorrelationMatrix::equicorrelated(2, 0.6).unwrap();
        let p2 = orthant_prob_oracle(&m2, &[0.4, -0.2]).unwrap();
        assert!((p3 - p2 * std_normal_cdf(1.1)).abs() <= 1e-8);
    }

    #[test]
    fn agrees_with_monte_carlo_complement() {
        for seed in [3u64, 11, 27] {
            let m = random_psd_correlation(3, seed);
            let u = 1.0;
            let oracle = orthant_prob_oracle(&m, &[u, u, u]).unwrap();
            let mc = mc_sup_tail(&m, u, 400_000, seed).unwrap();
            let diff = (1.0 - oracle - mc.p_hat).abs();
            assert!(
                diff <= 4.0 * mc.std_err,
                "seed {seed}: diff {diff} vs 4se {}",
                4.0 * mc.std_err
            );
        }
    }

    #[test]
    fn rejects_large_dimension_and_degenerate() {
        let m = CorrelationMatrix::identity(4);
        assert!(matches!(
            orthant_prob_oracle(&m, &[0.0; 4]),
            Err(Error::UnsupportedDimension { n: 4 })
        ));
        let d = CorrelationMatrix::equicorrelated(2, 1.0).unwrap();
        assert!(matches!(
            orthant_prob_oracle(&d, &[0.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
