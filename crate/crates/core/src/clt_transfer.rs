//! Exchangeable-pair central-limit error bounds: transferring Gaussian
//! supremum conclusions to Rademacher linear processes.
//!
//! For `X_t = sum_i alpha_i(t) eps_i` with Rademacher `eps` and the Gaussian
//! counterpart `Y_t = sum_i alpha_i(t) g_i`, the exchangeable-pair theorem
//! bounds `|E h(X) - E h(Y)|` by one third of the supremum of the mixed
//! third partials of `h` times the triple coefficient sum. Taking `h` as a
//! product of smoothed step functions turns that into a one-sided transfer
//! between `P(max X <= a)` and `P(max Y <= b)`.
//!
//! Only the consequence (the error-bound formula) is computed here; the
//! exchangeable-pair construction itself (the random index, the resampled
//! copy, the regression identity `E(X' - X | X) = -X/n`) is a derivation
//! device and is not simulated.

use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::matrix::{cholesky, CorrelationMatrix};
use crate::mc::MCEstimate;
use crate::rng::{sample_rng, Stream};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Coefficients `alpha_i(t)` of a finite linear process, stored row-major
/// over the underlying variables `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientArray {
    n: usize,
    t: usize,
    alpha: Vec<f64>,
}

impl CoefficientArray {
    pub fn new(n: usize, t: usize, alpha: Vec<f64>) -> Result<Self> {
        if n == 0 || t == 0 {
            return Err(Error::Config("coefficient array must be nonempty".into()));
        }
        if alpha.len() != n * t {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                n * t,
                alpha.len()
            )));
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        let arr = CoefficientArray { n, t, alpha };
        for col in 0..t {
            let norm: f64 = (0..n).map(|i| arr.get(i, col).powi(2)).sum();
            if !(norm > 0.0) {
                return Err(Error::Config(format!(
                    "degenerate coordinate: column {col} has zero norm"
                )));
            }
        }
        Ok(arr)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Config("ragged coefficient rows".into()));
        }
        Self::new(n, t, rows.into_iter().flatten().collect())
    }

    #[inline]
    pub fn n_vars(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn t_count(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.alpha[i * self.t + t]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.alpha[i * self.t..(i + 1) * self.t]
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.t, self.alpha.iter().map(|v| v * lambda).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CoefficientWire {
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    alpha: Vec<Vec<f64>>,
}

impl Serialize for CoefficientArray {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoefficientWire {
            n: self.n,
            t: self.t,
            alpha: (0..self.n).map(|i| self.row(i).to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientArray {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = CoefficientWire::deserialize(d)?;
        if wire.alpha.len() != wire.n || wire.alpha.iter().any(|r| r.len() != wire.t) {
            return Err(serde::de::Error::custom("alpha shape mismatch with n, T"));
        }
        CoefficientArray::from_rows(wire.alpha).map_err(serde::de::Error::custom)
    }
}

// Derivative caps of the degree-7 transition polynomial
// S(x) = 35x^4 - 84x^5 + 70x^6 - 20x^7 on [0, 1]:
//   sup |S'|   = S'(1/2) = 35/16                      (S' = 140 x^3 (1-x)^3)
//   sup |S''|  = 84 sqrt(5) / 25  at x(1-x) = 1/5     (S'' = 420 x^2 (1-x)^2 (1-2x))
//   sup |S'''| = 105/2 at the midpoint                (S''' = 840 u (1 - 5u), u = x(1-x))
pub const SMOOTHING_C0: f64 = 1.0;
pub const SMOOTHING_C1: f64 = 2.1875;
pub const SMOOTHING_C2: f64 = 7.513188404399293;
pub const SMOOTHING_C3: f64 = 52.5;

/// Three-times differentiable step: 1 for `z <= a`, 0 for `z >= b`, the
/// two-point degree-7 interpolant in between. Returns
/// `[s, s', s'', s''']` at `z`.
pub fn smoothing_value(z: f64, a: f64, b: f64) -> Result<[f64; 4]> {
    if !(a < b) {
        return Err(Error::Domain(format!("smoothing needs a < b, got {a}, {b}")));
    }
    let w = b - a;
    if z <= a {
        return Ok([1.0, 0.0, 0.0, 0.0]);
    }
    if z >= b {
        return Ok([0.0, 0.0, 0.0, 0.0]);
    }
    let x = (z - a) / w;
    let x2 = x * x;
    let x3 = x2 * x;
    let omx = 1.0 - x;
    let s = 1.0 - (35.0 * x2 * x2 - 84.0 * x2 * x3 + 70.0 * x3 * x3 - 20.0 * x3 * x3 * x);
    let d1 = -140.0 * x3 * omx * omx * omx / w;
    let d2 = -420.0 * x2 * omx * omx * (1.0 - 2.0 * x) / (w * w);
    let u = x * omx;
    let d3 = -840.0 * u * (1.0 - 5.0 * u) / (w * w * w);
    Ok([s, d1, d2, d3])
}

/// `sup |s^{(r)}|` over the whole line for the transition width `b - a`.
pub fn smoothing_derivative_cap(r: usize, width: f64) -> f64 {
    let c = [SMOOTHING_C0, SMOOTHING_C1, SMOOTHING_C2, SMOOTHING_C3][r];
    c / width.powi(r as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleSumMode {
    /// The full triple sum `sum_{s,t,u} sum_i |alpha_i(s) alpha_i(t)
    /// alpha_i(u)|`, which collapses to `sum_i (sum_t |alpha_i(t)|)^3`.
    ExactTriple,
    /// The `T^3 sum_i max_t |alpha_i(t)|^3` overestimate.
    MaxOverestimate,
}

/// The assembled error bound and its ingredients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CLTErrorReport {
    /// `sum_i max_t |alpha_i(t)|^3`.
    pub cube_sum: f64,
    /// Triple sum in the selected mode.
    pub full_triple_sum: f64,
    /// Upper bound on the mixed third partials of the product-of-steps
    /// test function.
    pub third_deriv_cap: f64,
    /// `third_deriv_cap * full_triple_sum / 3`.
    pub total_error: f64,
    pub mode: TripleSumMode,
}

const EXACT_TRIPLE_T_CAP: usize = 64;

/// The exchangeable-pair error bound for coefficients `alpha` and the
/// smoothing window `[a, b]`.
///
/// The cap on the mixed third partial of `h(x) = prod_t s(x_t)` is the
/// worst of the three index patterns (all equal: `C3`; two equal:
/// `C2 C1`; all distinct: `C1^3`), each divided by the cube of the window
/// width, since every remaining factor is bounded by 1.
pub fn rr_error_bound(
    coeffs: &CoefficientArray,
    a: f64,
    b: f64,
    mode: TripleSumMode,
) -> Result<CLTErrorReport> {
    if !(a < b) {
        return Err(Error::Domain(format!("window needs a < b, got {a}, {b}")));
    }
    let t = coeffs.t_count();
    if mode == TripleSumMode::ExactTriple && t > EXACT_TRIPLE_T_CAP {
        return Err(Error::InstanceTooLarge {
            dim: t,
            cap: EXACT_TRIPLE_T_CAP,
        });
    }
    let mut cube = KahanSum::new();
    let mut triple = KahanSum::new();
    for i in 0..coeffs.n_vars() {
        let row = coeffs.row(i);
        let mut max_abs = 0.0f64;
        let mut l1 = 0.0f64;
        for &v in row {
            let av = v.abs();
            max_abs = max_abs.max(av);
            l1 += av;
        }
        cube.add(max_abs * max_abs * max_abs);
        if mode == TripleSumMode::ExactTriple {
            triple.add(l1 * l1 * l1);
        }
    }
    let cube_sum = cube.value();
    let full_triple_sum = match mode {
        TripleSumMode::ExactTriple => triple.value(),
        TripleSumMode::MaxOverestimate => (t * t * t) as f64 * cube_sum,
    };
    let w = b - a;
    let w3 = w * w * w;
    let third_deriv_cap = (SMOOTHING_C3)
        .max(SMOOTHING_C2 * SMOOTHING_C1)
        .max(SMOOTHING_C1 * SMOOTHING_C1 * SMOOTHING_C1)
        / w3;
    Ok(CLTErrorReport {
        cube_sum,
        full_triple_sum,
        third_deriv_cap,
        total_error: third_deriv_cap * full_triple_sum / 3.0,
        mode,
    })
}

/// Twin Monte-Carlo transfer check.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub threshold_low: f64,
    pub threshold_high: f64,
    /// `P(max_t X_t <= threshold_low)`, Rademacher side.
    pub rademacher: MCEstimate,
    /// `P(max_t Y_t <= threshold_high)`, Gaussian side.
    pub gaussian: MCEstimate,
    pub error: CLTErrorReport,
    /// Gaussian probability plus the analytic error term.
    pub rhs: f64,
    /// `rhs + 4 se - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
    pub combined_std_err: f64,
    pub holds: bool,
}

fn rademacher_orthant_mc(
    coeffs: &CoefficientArray,
    threshold: f64,
    n_samples: u64,
    seed: u64,
) -> MCEstimate {
    let n = coeffs.n_vars();
    let t = coeffs.t_count();
    let hits: u64 = (0..n_samples)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; t],
            |acc, idx| {
                let mut rng = sample_rng(seed, Stream::RademacherMc, idx);
                acc.fill(0.0);
                let mut bits = 0u64;
                let mut remaining = 0u32;
                for i in 0..n {
                    if remaining == 0 {
                        bits = rng.gen();
                        remaining = 64;
                    }
                    let sign = if bits & 1 == 1 { 1.0 } else { -1.0 };
                    bits >>= 1;
                    remaining -= 1;
                    let row = coeffs.row(i);
                    for (a, &v) in acc.iter_mut().zip(row) {
                        *a += sign * v;
                    }
                }
                acc.iter().all(|&v| v <= threshold) as u64
            },
        )
        .sum();
    MCEstimate::from_count(hits, n_samples, seed)
}

fn gaussian_orthant_mc(
    coeffs: &CoefficientArray,
    threshold: f64,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    let n = coeffs.n_vars();
    let t = coeffs.t_count();
    // Y is Gaussian with covariance alpha^T alpha; sample in T dimensions
    // through the normalised Cholesky factor when it exists, otherwise
    // fall back to direct n-dimensional sampling.
    let mut cov = vec![0.0f64; t * t];
    for i in 0..n {
        let row = coeffs.row(i);
        for a in 0..t {
            for b in a..t {
                cov[a * t + b] += row[a] * row[b];
            }
        }
    }
    let sigmas: Vec<f64> = (0..t).map(|a| cov[a * t + a].sqrt()).collect();
    let mut corr = vec![0.0f64; t * t];
    for a in 0..t {
        corr[a * t + a] = 1.0;
        for b in a + 1..t {
            let v = cov[a * t + b] / (sigmas[a] * sigmas[b]);
            corr[a * t + b] = v;
            corr[b * t + a] = v;
        }
    }
    let low_dim = CorrelationMatrix::from_flat(t, corr)
        .ok()
        .and_then(|m| cholesky(&m).ok().map(|f| (m, f)));
    if let Some((_, factor)) = low_dim {
        let thresholds: Vec<f64> = sigmas.iter().map(|&s| threshold / s).collect();
        let hits: u64 = (0..n_samples)
            .into_par_iter()
            .map_init(
                || vec![0.0f64; t],
                |g, idx| {
                    let mut rng = sample_rng(seed, Stream::GaussianTransfer, idx);
                    for gi in g.iter_mut() {
                        *gi = rng.sample(StandardNormal);
                    }
                    let mut inside = true;
                    for a in 0..t {
                        let row = factor.row(a);
                        let mut acc = 0.0;
                        for (l, gv) in row.iter().zip(&g[..=a]) {
                            acc += l * gv;
                        }
                        if acc > thresholds[a] {
                            inside = false;
                            break;
                        }
                    }
                    inside as u64
                },
            )
            .sum();
        return Ok(MCEstimate::from_count(hits, n_samples, seed));
    }
    // degenerate T-dimensional law: sample the underlying variables
    let hits: u64 = (0..n_samples)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; t],
            |acc, idx| {
                let mut rng = sample_rng(seed, Stream::GaussianTransfer, idx);
                acc.fill(0.0);
                for i in 0..n {
                    let g: f64 = rng.sample(StandardNormal);
                    let row = coeffs.row(i);
                    for (a, &v) in acc.iter_mut().zip(row) {
                        *a += g * v;
                    }
                }
                acc.iter().all(|&v| v <= threshold) as u64
            },
        )
        .sum();
    Ok(MCEstimate::from_count(hits, n_samples, seed))
}

/// Empirically checks the smoothed transfer inequality
/// `P(max X <= a) <= P(max Y <= b) + total_error` with twin Monte-Carlo
/// estimates on both sides.
pub fn transfer_bound(
    coeffs: &CoefficientArray,
    threshold_low: f64,
    threshold_high: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TransferReport> {
    if !(threshold_low < threshold_high) {
        return Err(Error::Domain(format!(
            "thresholds must satisfy a < b, got {threshold_low}, {threshold_high}"
        )));
    }
    let mode = if coeffs.t_count() <= EXACT_TRIPLE_T_CAP {
        TripleSumMode::ExactTriple
    } else {
        TripleSumMode::MaxOverestimate
    };
    let error = rr_error_bound(coeffs, threshold_low, threshold_high, mode)?;
    let rademacher = rademacher_orthant_mc(coeffs, threshold_low, n_samples, seed);
    let gaussian = gaussian_orthant_mc(coeffs, threshold_high, n_samples, seed ^ 0x9a55)?;
    let rhs = gaussian.p_hat + error.total_error;
    let combined_std_err =
        (rademacher.std_err * rademacher.std_err + gaussian.std_err * gaussian.std_err).sqrt();
    let slack = rhs + 4.0 * combined_std_err - rademacher.p_hat;
    Ok(TransferReport {
        threshold_low,
        threshold_high,
        rademacher,
        gaussian,
        error,
        rhs,
        slack,
        combined_std_err,
        holds: slack >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothing_boundary_conditions() {
        let (a, b) = (-0.3, 1.7);
        for z in [a - 5.0, a - 1e-12, a] {
            assert_eq!(smoothing_value(z, a, b).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        }
        for z in [b, b + 1e-12, b + 9.0] {
            assert_eq!(smoothing_value(z, a, b).unwrap(), [0.0, 0.0, 0.0, 0.0]);
        }
        let mid = smoothing_value(0.5 * (a + b), a, b).unwrap();
        assert!((mid[0] - 0.5).abs() <= 1e-12);
        assert!(smoothing_value(0.0, 1.0, 1.0).is_err());
        assert!(smoothing_value(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn smoothing_monotone_and_sandwiched() {
        let (a, b) = (0.0, 1.0);
        let mut prev = 1.0f64;
        for k in 0..=10_000 {
            let z = -0.5 + 2.0 * k as f64 / 10_000.0;
            let s = smoothing_value(z, a, b).unwrap()[0];
            assert!((0.0..=1.0).contains(&s));
            assert!(s <= prev + 1e-15, "not monotone at z = {z}");
            // indicator(z <= a) <= s(z) <= indicator(z <= b)
            let lower = if z <= a { 1.0 } else { 0.0 };
            let upper = if z <= b { 1.0 } else { 0.0 };
            assert!(lower - 1e-15 <= s && s <= upper + 1e-15);
            prev = s;
        }
    }

    #[test]
    fn smoothing_derivatives_match_finite_differences() {
        let (a, b) = (0.0, 1.0);
        let eps = 1e-5;
        for k in 0..100 {
            let z = (k as f64 + 0.5) / 100.0;
            let v = smoothing_value(z, a, b).unwrap();
            let plus = smoothing_value(z + eps, a, b).unwrap();
            let minus = smoothing_value(z - eps, a, b).unwrap();
            for r in 1..=3 {
                let fd = (plus[r - 1] - minus[r - 1]) / (2.0 * eps);
                let scale = smoothing_derivative_cap(r, b - a);
                let tol = 1e-5 * v[r].abs().max(1e-3 * scale);
                assert!(
                    (fd - v[r]).abs() <= tol,
                    "order {r} at z = {z}: fd {fd} vs {}",
                    v[r]
                );
            }
        }
    }

    #[test]
    fn smoothing_caps_are_attained_not_exceeded() {
        let (a, b) = (0.0, 2.0);
        let mut sup = [0.0f64; 4];
        for k in 0..=20_000 {
            let z = a + (b - a) * k as f64 / 20_000.0;
            let v = smoothing_value(z, a, b).unwrap();
            for r in 0..4 {
                sup[r] = sup[r].max(v[r].abs());
            }
        }
        for r in 0..4 {
            let cap = smoothing_derivative_cap(r, b - a);
            assert!(sup[r] <= cap + 1e-9, "order {r}: sup {} > cap {cap}", sup[r]);
            assert!(sup[r] >= 0.98 * cap, "order {r}: cap looks slack");
        }
    }

    #[test]
    fn single_coefficient_error() {
        let c = CoefficientArray::new(1, 1, vec![1.0]).unwrap();
        let rep = rr_error_bound(&c, 0.0, 1.0, TripleSumMode::ExactTriple).unwrap();
        assert_eq!(rep.cube_sum, 1.0);
        assert_eq!(rep.full_triple_sum, 1.0);
        assert!((rep.total_error - SMOOTHING_C3 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_column_rejected() {
        assert!(CoefficientArray::new(2, 2, vec![1.0, 0.0, 2.0, 0.0]).is_err());
    }

    #[test]
    fn cubic_homogeneity_exact() {
        let c =
            CoefficientArray::from_rows(vec![vec![0.3, -0.7], vec![1.1, 0.2], vec![-0.4, 0.9]])
                .unwrap();
        let base = rr_error_bound(&c, 0.0, 0.5, TripleSumMode::ExactTriple).unwrap();
        let lambda = 1e-3;
        let scaled = rr_error_bound(&c.scaled(lambda).unwrap(), 0.0, 0.5, TripleSumMode::ExactTriple)
            .unwrap();
        let ratio = scaled.total_error / base.total_error;
        assert!(
            (ratio - lambda.powi(3)).abs() <= 1e-12 * lambda.powi(3),
            "ratio {ratio}"
        );
    }

    proptest! {
        #[test]
        fn exact_triple_below_max_overestimate(
            rows in proptest::collection::vec(
                proptest::collection::vec(-2.0f64..2.0, 3), 1..20)
        ) {
            // ensure no zero column
            let mut rows = rows;
            for r in rows.iter_mut() {
                for v in r.iter_mut() {
                    if v.abs() < 1e-3 { *v = 0.5; }
                }
            }
            let c = CoefficientArray::from_rows(rows).unwrap();
            let ex = rr_error_bound(&c, 0.0, 1.0, TripleSumMode::ExactTriple).unwrap();
            let mx = rr_error_bound(&c, 0.0, 1.0, TripleSumMode::MaxOverestimate).unwrap();
            prop_assert!(ex.total_error <= mx.total_error * (1.0 + 1e-12));
            prop_assert!(ex.full_triple_sum <= (c.t_count().pow(3)) as f64 * ex.cube_sum + 1e-12);
        }
    }

    #[test]
    fn exact_triple_respects_t_cap() {
        let t = 65;
        let c = CoefficientArray::new(1, t, vec![0.1; t]).unwrap();
        assert!(matches!(
            rr_error_bound(&c, 0.0, 1.0, TripleSumMode::ExactTriple),
            Err(Error::InstanceTooLarge { .. })
        ));
        assert!(rr_error_bound(&c, 0.0, 1.0, TripleSumMode::MaxOverestimate).is_ok());
    }

    #[test]
    fn transfer_two_point_case() {
        // n = 1, T = 1, alpha = 1: X = eps, P(X <= 0.5) = 1/2 exactly
        let c = CoefficientArray::new(1, 1, vec![1.0]).unwrap();
        let rep = transfer_bound(&c, 0.5, 1.0, 100_000, 9).unwrap();
        assert!((rep.rademacher.p_hat - 0.5).abs() <= 4.0 * rep.rademacher.std_err);
        assert!(rep.holds);
    }

    #[test]
    fn transfer_on_random_arrays() {
        for seed in 0..5u64 {
            let mut rng = sample_rng(seed, Stream::InstanceGen, 50);
            let n = rand::Rng::gen_range(&mut rng, 5..50);
            let t = rand::Rng::gen_range(&mut rng, 2..8usize);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..t)
                        .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0) / (n as f64).sqrt())
                        .collect()
                })
                .collect();
            let c = CoefficientArray::from_rows(rows).unwrap();
            let rep = transfer_bound(&c, 0.4, 0.9, 60_000, seed).unwrap();
            assert!(rep.holds, "seed {seed}: slack {}", rep.slack);
        }
    }

    #[test]
    fn gaussian_side_matches_oracle_when_low_dimensional() {
        // alpha rows orthogonal-ish: Y has an easily checkable law
        let c = CoefficientArray::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let est = gaussian_orthant_mc(&c, 0.7, 400_000, 21).unwrap();
        let expect = crate::special::std_normal_cdf(0.7).powi(2);
        assert!(
            (est.p_hat - expect).abs() <= 4.0 * est.std_err,
            "{} vs {expect}",
            est.p_hat
        );
    }

    #[test]
    fn coefficient_serde_round_trip() {
        let c = CoefficientArray::from_rows(vec![vec![0.5, -0.25], vec![0.125, 1.5]]).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"T\":2"));
        let back: CoefficientArray = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
        assert!(serde_json::from_str::<CoefficientArray>(
            r#"{"n":2,"T":2,"alpha":[[1.0,2.0]]}"#
        )
        .is_err());
    }
}
