//! Lower-bound surrogates for the Pickands constants `H_alpha` from a
//! sampled stationary process with an explicit covariance kernel, plus a
//! catalogue of published reference bounds.
//!
//! The pipeline samples the kernel at `t_i = i / M`, applies the stationary
//! conditioning/comparison bound with the complement choice
//! `c_j = r((M-j)/M)`, `d_j = 1 - r((M-j)/M)`, and renormalises by the
//! extreme-value limit so that the resulting `finite_u_value` is a
//! quantity whose large-`u` limit lower-bounds `H_alpha`. The limit is
//! never claimed: values are reported at finite `u` on a grid.

use crate::error::{Error, Result};
use crate::matrix::{cholesky, CorrelationMatrix};
use crate::matrix_cap;
use crate::special::{std_normal_cdf, SQRT_2PI};
use crate::tail_bounds::{stationary_prop1_bound, BoundConfig};
use serde::{Deserialize, Serialize};

pub use crate::special::ln_gamma;

/// Stationary covariance kernel
/// `r(t) = (e^{alpha t/2} + e^{-alpha t/2} - (e^{t/2} - e^{-t/2})^alpha)/2`,
/// which satisfies `r(t) = 1 - t^alpha/2 + O(t^2)` at the origin and is
/// strictly decreasing for `t > 0`.
pub fn shao_covariance(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!(
            "shao covariance requires 0 < alpha < 2, got {alpha}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let half = 0.5 * t;
    Ok(0.5 * ((alpha * half).exp() + (-alpha * half).exp() - (half.exp() - (-half).exp()).powf(alpha)))
}

/// Correlation matrix of the kernel sampled at `t_i = i / M`, PSD-validated.
pub fn pickands_grid_matrix(alpha: f64, m: usize) -> Result<CorrelationMatrix> {
    if m < 2 {
        return Err(Error::Config(format!("grid needs M >= 2, got {m}")));
    }
    let mut lags = Vec::with_capacity(m);
    lags.push(1.0);
    for k in 1..m {
        lags.push(shao_covariance(alpha, k as f64 / m as f64)?);
    }
    let matrix = CorrelationMatrix::stationary(m, |k| lags[k])?;
    cholesky(&matrix)?;
    Ok(matrix)
}

/// Named published bounds for `H_alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceBounds {
    pub alpha: f64,
    /// Folklore conjecture `1 / Gamma(1/alpha)`.
    pub conjecture: f64,
    /// `(alpha/4)^{1/alpha} (1 - e^{-1/alpha}(1 + 1/alpha))`, stated for
    /// `0 < alpha < 1`.
    pub shao_lower: Option<f64>,
    /// Companion upper bound from the same source, for context only.
    pub shao_upper: Option<f64>,
    /// `(alpha / (8 Gamma(1/alpha))) (1/4)^{1/alpha}`.
    pub dmr_lower: f64,
    /// Twice the previous bound.
    pub michna_lower: f64,
    /// The constant-free shape `sqrt(alpha) (e alpha / 2)^{1/alpha}`.
    pub corollary1_shape: f64,
}

/// Evaluates the reference-bound catalogue at `alpha` in `(0, 2]`.
///
/// Everything goes through `ln_gamma` and exponentials so small `alpha`
/// (large `1/alpha`) cannot overflow.
pub fn reference_bounds(alpha: f64) -> Result<ReferenceBounds> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!(
            "reference bounds require 0 < alpha <= 2, got {alpha}"
        )));
    }
    let inv = 1.0 / alpha;
    let lg = ln_gamma(inv)?;
    let conjecture = (-lg).exp();
    let dmr_lower = (alpha.ln() - (8.0f64).ln() - lg - inv * (4.0f64).ln()).exp();
    let shao_lower = (alpha < 1.0)
        .then(|| (inv * (alpha / 4.0).ln()).exp() * (1.0 - (-inv).exp() * (1.0 + inv)));
    let shao_upper = (alpha < 1.0).then(|| {
        let inner = 2.41 * (8.8 - alpha * (0.4 + 2.5 / alpha).ln()).sqrt() + 0.77 * alpha.sqrt();
        (inv * alpha.ln()).exp() * inner.powf(2.0 * inv)
    });
    let corollary1_shape = (0.5 * alpha.ln() + inv * (1.0 + alpha.ln() - (2.0f64).ln())).exp();
    Ok(ReferenceBounds {
        alpha,
        conjecture,
        shao_lower,
        shao_upper,
        dmr_lower,
        michna_lower: 2.0 * dmr_lower,
        corollary1_shape,
    })
}

/// One finite-`u` evaluation of the lower-bound surrogate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PickandsEvaluation {
    pub alpha: f64,
    pub u: f64,
    pub m: usize,
    pub b: f64,
    pub a: f64,
    pub delta: f64,
    /// `2^{1/alpha} sqrt(2 pi) u^{1 - 2/alpha} e^{u^2/2}` times the
    /// stationary tail lower bound: the quantity whose `u -> infinity`
    /// limit lower-bounds `H_alpha` under the extreme-value normalisation
    /// with unit interval and curvature constant 1/2.
    pub finite_u_value: f64,
    /// The underlying `P(max > u)` lower bound before renormalisation.
    pub stationary_bound: f64,
    /// Product of comparison factors at gaps above `M^{1/4}`; near 1 when
    /// the far part of the product is negligible.
    pub tail_product: f64,
    /// Kernel degenerates to perfect correlation (alpha = 2): no positive
    /// bound is available and the surrogate is trivially 0.
    pub degenerate: bool,
    pub references: ReferenceBounds,
}

/// Evaluates the surrogate at `(alpha, u)` with grid size
/// `M = floor((b u^2 alpha / 2)^{1/alpha})`.
///
/// `delta` defaults to `alpha`. For `alpha = 2` exactly the kernel is
/// identically 1 and the machinery provides no positive bound; the
/// evaluation is returned with `finite_u_value = 0` and the `degenerate`
/// flag set.
pub fn pickands_lower_surrogate(
    alpha: f64,
    u: f64,
    b: f64,
    a: f64,
    delta: Option<f64>,
) -> Result<PickandsEvaluation> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!(
            "surrogate requires 0 < alpha <= 2, got {alpha}"
        )));
    }
    if !(1.0..=10.0).contains(&b) {
        return Err(Error::Config(format!("b must lie in [1, 10], got {b}")));
    }
    if !(a > 0.0) {
        return Err(Error::Config(format!("a must be > 0, got {a}")));
    }
    let delta = delta.unwrap_or(alpha);
    let references = reference_bounds(alpha)?;
    if alpha == 2.0 {
        return Ok(PickandsEvaluation {
            alpha,
            u,
            m: 0,
            b,
            a,
            delta,
            finite_u_value: 0.0,
            stationary_bound: 0.0,
            tail_product: 1.0,
            degenerate: true,
            references,
        });
    }
    let inv = 1.0 / alpha;
    let m = (b * u * u * alpha / 2.0).powf(inv).floor() as i64;
    if m < 2 {
        return Err(Error::Config(format!(
            "u = {u} too small for alpha = {alpha}: derived M = {m} < 2"
        )));
    }
    let m = m as usize;
    let cap = matrix_cap();
    if m > cap {
        return Err(Error::InstanceTooLarge { dim: m, cap });
    }

    let mut lags = Vec::with_capacity(m);
    lags.push(1.0);
    for k in 1..m {
        lags.push(shao_covariance(alpha, k as f64 / m as f64)?);
    }
    let cfg = BoundConfig::stationary_complement(u, a / u, delta);
    let stationary_bound = stationary_prop1_bound(&|k| lags[k], m, u, a, &cfg)?;

    // Renormalise: finite_u_value = 2^{1/alpha} sqrt(2 pi) u^{1-2/alpha}
    // e^{u^2/2} * bound
    let finite_u_value =
        (inv * (2.0f64).ln()).exp() * SQRT_2PI * u.powf(1.0 - 2.0 * inv) * (u * u / 2.0).exp()
            * stationary_bound;

    // Diagnostic: comparison factors at gaps above M^{1/4}, evaluated at the
    // window endpoint h = a/u.
    let h = a / u;
    let gap_cut = (m as f64).powf(0.25);
    let mut tail_product = 1.0;
    for gap in 1..m {
        if (gap as f64) <= gap_cut {
            continue;
        }
        let r = lags[gap];
        let tau = u - r * (u + h);
        if tau < 0.0 {
            tail_product = 0.0;
            break;
        }
        let denom = (1.0 - r * r - r * (1.0 - r)).sqrt();
        tail_product *= std_normal_cdf((1.0 - delta) * tau / denom);
    }

    Ok(PickandsEvaluation {
        alpha,
        u,
        m,
        b,
        a,
        delta,
        finite_u_value,
        stationary_bound,
        tail_product,
        degenerate: false,
        references,
    })
}
