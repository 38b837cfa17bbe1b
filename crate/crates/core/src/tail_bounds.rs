//! Lower bounds for `P(max_i Z_i > u)` via a conditioning step and a
//! comparison step, plus the classical normal comparison upper bounds and a
//! Slepian-ordering checker.
//!
//! The conditioning step decomposes the supremum event by the first index
//! exceeding `u` and bounds the exceedance integral below by
//! `H exp(-(u+H)^2/2) / sqrt(2 pi)` times a uniform-in-`h` lower bound for
//! the conditional orthant probability `P(m, h)`. The comparison step
//! replaces the conditional correlation structure by an explicit model built
//! from sequences `(c_j, d_j)`, paying a `Phi(B) - Phi(-B)` factor from the
//! Brownian reflection identity and a `(1 - delta)` shrink of each
//! threshold.

use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::matrix::CorrelationMatrix;
use crate::mc::mc_orthant;
use crate::orthant::{integrate, orthant_prob_oracle};
use crate::special::{central_normal_mass, std_normal_cdf, SQRT_2PI};
use serde::{Deserialize, Serialize};

/// Tolerance below which a hypothesis-(ii) margin counts as a boundary case
/// rather than a hard violation. Equality is fine for the Slepian-monotone
/// comparison the proof actually uses, but the proposition is stated with
/// strict inequality, so boundary cases are flagged.
const BOUNDARY_TOL: f64 = 1e-12;

/// How the comparison sequences `(c_j, d_j)` are derived for a pivot `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CdRule {
    /// Use the prefix of the explicitly supplied master sequences.
    #[default]
    Explicit,
    /// `c_j = r_{j,m}`, `d_j = 1 - r_{j,m}`: the natural choice for
    /// stationary sequences with decreasing nonnegative correlation.
    StationaryComplement,
}

fn default_h_grid() -> usize {
    17
}

/// Free parameters of the conditioning/comparison bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConfig {
    pub u: f64,
    /// Conditioning window height.
    #[serde(rename = "H")]
    pub big_h: f64,
    pub delta: f64,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub d: Vec<f64>,
    /// Diagnostic resolution for reporting the infimum location over
    /// `0 <= h <= H`; the bound value itself uses endpoint analysis.
    #[serde(default = "default_h_grid")]
    pub h_grid_points: usize,
    #[serde(default)]
    pub cd_rule: CdRule,
}

impl BoundConfig {
    pub fn stationary_complement(u: f64, big_h: f64, delta: f64) -> Self {
        BoundConfig {
            u,
            big_h,
            delta,
            c: vec![],
            d: vec![],
            h_grid_points: default_h_grid(),
            cd_rule: CdRule::StationaryComplement,
        }
    }

    pub fn explicit(u: f64, big_h: f64, delta: f64, c: Vec<f64>, d: Vec<f64>) -> Self {
        BoundConfig {
            u,
            big_h,
            delta,
            c,
            d,
            h_grid_points: default_h_grid(),
            cd_rule: CdRule::Explicit,
        }
    }

    /// Basic shape checks for configs arriving over the JSON interface.
    /// `delta` is restricted to `[0, 1)` here; the bound formulas themselves
    /// accept any `delta >= 0`.
    pub fn validate_interface(&self) -> Result<()> {
        if !(self.u >= 0.0) {
            return Err(Error::Config(format!("u must be >= 0, got {}", self.u)));
        }
        if !(self.big_h >= 0.0) {
            return Err(Error::Config(format!("H must be >= 0, got {}", self.big_h)));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.c.len() != self.d.len() {
            return Err(Error::Config(format!(
                "c and d have different lengths ({} vs {})",
                self.c.len(),
                self.d.len()
            )));
        }
        if self.h_grid_points < 2 {
            return Err(Error::Config("h_grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Resolve the `(c, d)` sequences for a 1-based pivot.
    pub fn cd_for_pivot(
        &self,
        m: &CorrelationMatrix,
        pivot: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.cd_rule {
            CdRule::Explicit => {
                if self.c.len() < pivot - 1 || self.d.len() < pivot - 1 {
                    return Err(Error::Config(format!(
                        "explicit c/d sequences too short for pivot {pivot}: have {}",
                        self.c.len()
                    )));
                }
                Ok((self.c[..pivot - 1].to_vec(), self.d[..pivot - 1].to_vec()))
            }
            CdRule::StationaryComplement => {
                let c: Vec<f64> = (0..pivot - 1).map(|j| m.get(j, pivot - 1)).collect();
                let d: Vec<f64> = c.iter().map(|r| 1.0 - r).collect();
                Ok((c, d))
            }
        }
    }
}

/// One hypothesis-(ii) violation, with its margin
/// `r_{j,k} - r_{j,m} r_{k,m} - c_min d_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairViolation {
    pub j: usize,
    pub k: usize,
    pub margin: f64,
    /// Margin within tolerance of zero: mathematically admissible but
    /// outside the strict statement.
    pub boundary: bool,
}

/// Outcome of checking the comparison-step hypotheses for one pivot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pivot: usize,
    /// Hypothesis (i): indices `j` where `c_j / d_j` decreases.
    pub ratio_violations: Vec<usize>,
    /// Hypothesis (ii): pairs where the margin is nonpositive.
    pub pair_violations: Vec<PairViolation>,
    /// Indices where `1 - r_{j,m}^2 - c_j d_j <= 0`.
    pub denominator_violations: Vec<usize>,
    /// Indices with `d_j <= 0`.
    pub d_nonpositive: Vec<usize>,
}

impl ValidationReport {
    /// All hypotheses hold with strict inequalities.
    pub fn passed_strict(&self) -> bool {
        self.ratio_violations.is_empty()
            && self.pair_violations.is_empty()
            && self.denominator_violations.is_empty()
            && self.d_nonpositive.is_empty()
    }

    /// All hypotheses hold, allowing boundary-flagged equality in (ii).
    pub fn passed_weak(&self) -> bool {
        self.ratio_violations.is_empty()
            && self.denominator_violations.is_empty()
            && self.d_nonpositive.is_empty()
            && self.pair_violations.iter().all(|v| v.boundary)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} ratio, {} pair, {} denominator, {} nonpositive-d violations",
            self.ratio_violations.len(),
            self.pair_violations.len(),
            self.denominator_violations.len(),
            self.d_nonpositive.len()
        )
    }
}

/// Checks the comparison-step hypotheses for sequences `(c, d)` against the
/// pivot's partial correlations.
pub fn validate_cd(
    m: &CorrelationMatrix,
    pivot: usize,
    c: &[f64],
    d: &[f64],
) -> Result<ValidationReport> {
    if pivot < 1 || pivot > m.n() {
        return Err(Error::Config(format!(
            "pivot {pivot} out of range 1..={}",
            m.n()
        )));
    }
    if c.len() != pivot - 1 || d.len() != pivot - 1 {
        return Err(Error::Config(format!(
            "sequences must have length pivot - 1 = {}, got c: {}, d: {}",
            pivot - 1,
            c.len(),
            d.len()
        )));
    }
    let mut report = ValidationReport {
        pivot,
        ratio_violations: vec![],
        pair_violations: vec![],
        denominator_violations: vec![],
        d_nonpositive: vec![],
    };
    let p = pivot - 1; // 0-based pivot index
    for j in 0..p {
        if d[j] <= 0.0 {
            report.d_nonpositive.push(j + 1);
        }
    }
    for j in 1..p {
        if d[j - 1] > 0.0 && d[j] > 0.0 && c[j] / d[j] < c[j - 1] / d[j - 1] - BOUNDARY_TOL {
            report.ratio_violations.push(j + 1);
        }
    }
    for j in 0..p {
        let r_jm = m.get(j, p);
        if 1.0 - r_jm * r_jm - c[j] * d[j] <= 0.0 {
            report.denominator_violations.push(j + 1);
        }
        for k in j + 1..p {
            let margin = m.get(j, k) - r_jm * m.get(k, p) - c[j] * d[k];
            if margin <= BOUNDARY_TOL {
                report.pair_violations.push(PairViolation {
                    j: j + 1,
                    k: k + 1,
                    margin,
                    boundary: margin.abs() <= BOUNDARY_TOL,
                });
            }
        }
    }
    Ok(report)
}

/// The comparison-step lower bound for `P(m, h)` at a single `h`.
///
/// Pivot 1 has an empty conditioning set and returns 1 by convention.
pub fn prop2_pmh_bound(
    m: &CorrelationMatrix,
    pivot: usize,
    cfg: &BoundConfig,
    h: f64,
) -> Result<f64> {
    if pivot == 1 {
        return Ok(1.0);
    }
    let (c, d) = cfg.cd_for_pivot(m, pivot)?;
    let report = validate_cd(m, pivot, &c, &d)?;
    if !report.passed_weak() {
        return Err(Error::CdValidation {
            pivot,
            summary: report.summary(),
        });
    }
    let u = cfg.u;
    let p = pivot - 1;
    for j in 0..p {
        let threshold = u - m.get(j, p) * (u + h);
        if threshold < 0.0 {
            return Err(Error::HTooLarge {
                h,
                j: j + 1,
                threshold,
            });
        }
    }
    if c[p - 1] <= 0.0 {
        return Err(Error::BUndefined {
            index: p,
            value: c[p - 1],
        });
    }
    let term = evaluate_fixed_h(m, pivot, &c, &d, cfg.delta, u, h);
    Ok(term.0)
}

/// Product-and-B evaluation at a fixed `h`; assumes hypotheses and
/// preconditions already hold. Returns (value, B).
fn evaluate_fixed_h(
    m: &CorrelationMatrix,
    pivot: usize,
    c: &[f64],
    d: &[f64],
    delta: f64,
    u: f64,
    h: f64,
) -> (f64, f64) {
    let p = pivot - 1;
    let mut product = 1.0f64;
    let mut min_ratio = f64::INFINITY;
    for j in 0..p {
        let r = m.get(j, p);
        let tau = u - r * (u + h);
        let denom = (1.0 - r * r - c[j] * d[j]).sqrt();
        product *= std_normal_cdf((1.0 - delta) * tau / denom);
        min_ratio = min_ratio.min(tau / d[j]);
    }
    let b = delta * (d[p - 1] / c[p - 1]).sqrt() * min_ratio;
    ((central_normal_mass(b) * product).clamp(0.0, 1.0), b)
}

/// Why a pivot term was zeroed (or that it was evaluated normally).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PivotStatus {
    Evaluated,
    /// Threshold `u - r(u + H)` negative at the far endpoint: the
    /// comparison step does not apply uniformly on `[0, H]`.
    ZeroedThresholdNegative,
    /// `c_{m-1} <= 0`: `B(delta)` undefined.
    ZeroedBUndefined,
    /// Hard hypothesis failure for this pivot.
    ZeroedValidation,
}

/// Per-pivot diagnostics of a full conditioning-step bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerPivot {
    pub m: usize,
    pub inf_h_value: f64,
    pub h_at_inf: f64,
    pub b_delta: Option<f64>,
    pub status: PivotStatus,
}

/// A computed probability lower bound with per-pivot diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailBoundResult {
    pub bound: f64,
    pub per_m: Vec<PerPivot>,
    pub params_echo: BoundConfig,
    /// Nonzero only if clamping to [0, 1] changed the value by more than
    /// 1e-12, which signals numerical trouble rather than mathematics.
    pub clamp_adjustment: f64,
}

impl TailBoundResult {
    /// `H exp(-(u+H)^2/2) / sqrt(2 pi)` for the echoed parameters.
    pub fn prefactor(&self) -> f64 {
        let u = self.params_echo.u;
        let h = self.params_echo.big_h;
        h * (-(u + h) * (u + h) / 2.0).exp() / SQRT_2PI
    }
}

/// Uniform-in-`h` lower bound for `P(m, h)` over `h` in `[0, H]`, assuming
/// the `(c, d)` hypotheses already validated.
///
/// Thresholds `u - r_{j,m}(u + h)` are linear in `h`, so each product factor
/// and the `B` ratio attain their minimum over the interval at an endpoint;
/// the product of per-factor endpoint minima times the central mass at the
/// endpoint-minimal `B` is a valid lower bound for every `h` in the window.
/// When all `r_{j,m}` are nonnegative everything is monotone and the bound
/// is exactly the evaluation at `h = H`.
pub fn pivot_uniform_bound(
    m: &CorrelationMatrix,
    pivot: usize,
    c: &[f64],
    d: &[f64],
    delta: f64,
    u: f64,
    big_h: f64,
) -> PerPivot {
    if pivot == 1 {
        return PerPivot {
            m: 1,
            inf_h_value: 1.0,
            h_at_inf: 0.0,
            b_delta: None,
            status: PivotStatus::Evaluated,
        };
    }
    let p = pivot - 1;
    let zeroed = |status| PerPivot {
        m: pivot,
        inf_h_value: 0.0,
        h_at_inf: big_h,
        b_delta: None,
        status,
    };
    // tau_j(0) = u (1 - r) >= 0 always; only the far endpoint can fail.
    for j in 0..p {
        if u - m.get(j, p) * (u + big_h) < 0.0 {
            return zeroed(PivotStatus::ZeroedThresholdNegative);
        }
    }
    if c[p - 1] <= 0.0 {
        return zeroed(PivotStatus::ZeroedBUndefined);
    }
    let all_nonneg = (0..p).all(|j| m.get(j, p) >= 0.0);
    if all_nonneg {
        let (value, b) = evaluate_fixed_h(m, pivot, c, d, delta, u, big_h);
        return PerPivot {
            m: pivot,
            inf_h_value: value,
            h_at_inf: big_h,
            b_delta: Some(b),
            status: PivotStatus::Evaluated,
        };
    }
    // Mixed signs: combine per-factor minima across the two endpoints.
    let mut product = 1.0f64;
    let mut min_ratio = f64::INFINITY;
    for j in 0..p {
        let r = m.get(j, p);
        let denom = (1.0 - r * r - c[j] * d[j]).sqrt();
        let tau0 = u * (1.0 - r);
        let tau1 = u - r * (u + big_h);
        let tau_min = tau0.min(tau1);
        product *= std_normal_cdf((1.0 - delta) * tau_min / denom);
        min_ratio = min_ratio.min(tau_min / d[j]);
    }
    let b = delta * (d[p - 1] / c[p - 1]).sqrt() * min_ratio;
    let value = (central_normal_mass(b) * product).clamp(0.0, 1.0);
    // report which endpoint the single-h evaluation would prefer
    let (v0, _) = evaluate_fixed_h(m, pivot, c, d, delta, u, 0.0);
    let (v1, _) = evaluate_fixed_h(m, pivot, c, d, delta, u, big_h);
    PerPivot {
        m: pivot,
        inf_h_value: value,
        h_at_inf: if v0 <= v1 { 0.0 } else { big_h },
        b_delta: Some(b),
        status: PivotStatus::Evaluated,
    }
}

/// The conditioning-step lower bound for `P(max_i Z_i > u)`.
///
/// Sums, over pivots `m = 1..n`, a uniform-in-`h` lower bound for the
/// conditional orthant probability `P(m, h)`, each obtained from the
/// comparison step. Pivots whose hypotheses fail hard contribute zero and
/// are flagged in the result; a hard failure at the full pivot `m = n` is a
/// configuration error.
pub fn prop1_bound(m: &CorrelationMatrix, cfg: &BoundConfig) -> Result<TailBoundResult> {
    let n = m.n();
    m.require_no_repeats()?;
    if !(cfg.u >= 0.0) {
        return Err(Error::Config(format!("u must be >= 0, got {}", cfg.u)));
    }
    if !(cfg.big_h >= 0.0) {
        return Err(Error::Config(format!("H must be >= 0, got {}", cfg.big_h)));
    }
    if cfg.cd_rule == CdRule::Explicit && n > 1 && (cfg.c.len() != n - 1 || cfg.d.len() != n - 1)
    {
        return Err(Error::Config(format!(
            "explicit c/d must have length n - 1 = {}, got {} and {}",
            n - 1,
            cfg.c.len(),
            cfg.d.len()
        )));
    }
    let mut per_m = Vec::with_capacity(n);
    for pivot in 1..=n {
        let term = if pivot == 1 {
            pivot_uniform_bound(m, 1, &[], &[], cfg.delta, cfg.u, cfg.big_h)
        } else {
            let (c, d) = cfg.cd_for_pivot(m, pivot)?;
            let report = validate_cd(m, pivot, &c, &d)?;
            if !report.passed_weak() {
                if pivot == n {
                    return Err(Error::CdValidation {
                        pivot,
                        summary: report.summary(),
                    });
                }
                PerPivot {
                    m: pivot,
                    inf_h_value: 0.0,
                    h_at_inf: cfg.big_h,
                    b_delta: None,
                    status: PivotStatus::ZeroedValidation,
                }
            } else {
                pivot_uniform_bound(m, pivot, &c, &d, cfg.delta, cfg.u, cfg.big_h)
            }
        };
        per_m.push(term);
    }
    Ok(assemble_prop1(cfg, per_m))
}

/// Combines per-pivot terms into the final conditioning-step bound:
/// prefactor times the fixed-order sum of `inf_h_value`s, clamped to [0, 1].
pub fn assemble_prop1(cfg: &BoundConfig, per_m: Vec<PerPivot>) -> TailBoundResult {
    let mut total = KahanSum::new();
    for term in &per_m {
        total.add(term.inf_h_value);
    }
    let u = cfg.u;
    let h = cfg.big_h;
    let prefactor = h * (-(u + h) * (u + h) / 2.0).exp() / SQRT_2PI;
    let raw = prefactor * total.value();
    let bound = raw.clamp(0.0, 1.0);
    let clamp_adjustment = if (bound - raw).abs() > 1e-12 {
        bound - raw
    } else {
        0.0
    };
    TailBoundResult {
        bound,
        per_m,
        params_echo: cfg.clone(),
        clamp_adjustment,
    }
}

fn check_stationary_sequence(r: &dyn Fn(usize) -> f64, n: usize) -> Result<()> {
    if (r(0) - 1.0).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!("r(0) must be 1, got {}", r(0))));
    }
    for k in 1..n {
        if r(k) < 0.0 {
            return Err(Error::Hypothesis(format!("r({k}) = {} is negative", r(k))));
        }
        if r(k) > r(k - 1) + 1e-12 {
            return Err(Error::Hypothesis(format!(
                "r not decreasing at lag {k}: {} > {}",
                r(k),
                r(k - 1)
            )));
        }
    }
    Ok(())
}

/// Stationary refinement: every pivot term equals the last one, so the
/// bound is `M` times the `m = M` term with window `H = a / u`.
///
/// Requires `r` decreasing and nonnegative with `r(0) = 1`. Returns 0 (a
/// trivially sound bound) when the comparison step degenerates at the
/// window endpoint, e.g. for exactly independent sequences where
/// `c_{M-1} = 0`.
pub fn stationary_prop1_bound(
    r: &dyn Fn(usize) -> f64,
    big_m: usize,
    u: f64,
    a: f64,
    cfg: &BoundConfig,
) -> Result<f64> {
    if big_m == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    if !(u > 0.0) {
        return Err(Error::Config(format!("u must be > 0, got {u}")));
    }
    if !(a > 0.0) {
        return Err(Error::Config(format!("a must be > 0, got {a}")));
    }
    check_stationary_sequence(r, big_m)?;
    let big_h = a / u;
    let term = if big_m == 1 {
        1.0
    } else {
        let matrix = CorrelationMatrix::stationary(big_m, &r)?;
        matrix.require_no_repeats()?;
        let (c, d) = cfg.cd_for_pivot(&matrix, big_m)?;
        let report = validate_cd(&matrix, big_m, &c, &d)?;
        if !report.passed_weak() {
            return Err(Error::CdValidation {
                pivot: big_m,
                summary: report.summary(),
            });
        }
        pivot_uniform_bound(&matrix, big_m, &c, &d, cfg.delta, u, big_h).inf_h_value
    };
    let prefactor = big_m as f64 * (-u * u / 2.0).exp() / (SQRT_2PI * u)
        * a
        * (-a - a * a / (2.0 * u * u)).exp();
    Ok((prefactor * term).clamp(0.0, 1.0))
}

/// Fully explicit bound under the stationary parameter recipe:
/// `H = 1/u`, `delta = min(u^-2, sqrt(r(1) / (u^2 (1 - r(1)))))`, and the
/// complement rule for `(c, d)`.
pub fn theorem1_bound(r: &dyn Fn(usize) -> f64, n: usize, u: f64) -> Result<f64> {
    if !(u >= 1.0) {
        return Err(Error::Config(format!("u must be >= 1, got {u}")));
    }
    check_stationary_sequence(r, n)?;
    let r1 = if n > 1 { r(1) } else { 0.0 };
    if r1 * (1.0 + 2.0 / (u * u)) > 1.0 {
        return Err(Error::Hypothesis(format!(
            "r(1) (1 + 2 u^-2) = {} exceeds 1",
            r1 * (1.0 + 2.0 / (u * u))
        )));
    }
    let delta = (1.0 / (u * u)).min((r1 / (u * u * (1.0 - r1))).sqrt());
    let cfg = BoundConfig::stationary_complement(u, 1.0 / u, delta);
    let matrix = CorrelationMatrix::stationary(n, r)?;
    Ok(prop1_bound(&matrix, &cfg)?.bound)
}

/// Which of the three comparison upper bounds to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonVariant {
    /// The integral form, evaluated by adaptive quadrature after the
    /// `t = sin(theta)` substitution that removes the endpoint singularity.
    Integral,
    /// The arcsine form obtained by majorising the integrand's exponential.
    ArcSine,
    /// The closed form with the `(1 + r)^{3/2} / ((u_i^2 + u_j^2) sqrt(1-r))`
    /// prefactor.
    ClosedForm,
}

impl ComparisonVariant {
    pub fn from_index(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::Integral),
            2 => Ok(Self::ArcSine),
            3 => Ok(Self::ClosedForm),
            _ => Err(Error::Config(format!(
                "comparison variant must be 1..3, got {v}"
            ))),
        }
    }
}

/// Upper bound for `P(X <= u) - P(W <= u)` where `X` has correlations
/// `cov_x` and `W` has `cov_w`; only pairs with `r^1 > r^0` contribute.
pub fn comparison_bound(
    cov_x: &CorrelationMatrix,
    cov_w: &CorrelationMatrix,
    thresholds: &[f64],
    variant: ComparisonVariant,
) -> Result<f64> {
    let n = cov_x.n();
    if cov_w.n() != n {
        return Err(Error::Config(format!(
            "matrix dimensions differ: {n} vs {}",
            cov_w.n()
        )));
    }
    if thresholds.len() != n {
        return Err(Error::Config(format!(
            "expected {n} thresholds, got {}",
            thresholds.len()
        )));
    }
    let mut sum = KahanSum::new();
    for i in 0..n {
        for j in i + 1..n {
            let r1 = cov_x.get(i, j);
            let r0 = cov_w.get(i, j);
            if r1 <= r0 {
                continue;
            }
            let q = thresholds[i] * thresholds[i] + thresholds[j] * thresholds[j];
            let max_r = r1.abs().max(r0.abs());
            let term = match variant {
                ComparisonVariant::Integral => {
                    // int_{r0}^{r1} (1-t^2)^{-1/2} exp(-q / (2(1+|t|))) dt
                    // under t = sin(theta)
                    let f = |theta: f64| (-q / (2.0 * (1.0 + theta.sin().abs()))).exp();
                    let lo = r0.asin();
                    let hi = r1.asin();
                    let integral = if lo < 0.0 && hi > 0.0 {
                        integrate(f, lo, 0.0, 1e-13) + integrate(f, 0.0, hi, 1e-13)
                    } else {
                        integrate(f, lo, hi, 1e-13)
                    };
                    integral / (2.0 * std::f64::consts::PI)
                }
                ComparisonVariant::ArcSine => {
                    (r1.asin() - r0.asin()) * (-q / (2.0 * (1.0 + max_r))).exp()
                        / (2.0 * std::f64::consts::PI)
                }
                ComparisonVariant::ClosedForm => {
                    if max_r >= 1.0 {
                        return Err(Error::DegenerateCorrelation { r: max_r });
                    }
                    if q == 0.0 {
                        return Err(Error::DivisionByZero(format!(
                            "u_{i}^2 + u_{j}^2 = 0 in the closed-form variant"
                        )));
                    }
                    2.0 / std::f64::consts::PI * (1.0 + max_r).powf(1.5)
                        / (q * (1.0 - max_r).sqrt())
                        * (-q / (2.0 * (1.0 + max_r))).exp()
                }
            };
            sum.add(term);
        }
    }
    Ok(sum.value().max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlepianVerdict {
    Equality,
    Holds,
    Violated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlepianReport {
    pub p_x: f64,
    pub p_w: f64,
    pub margin: f64,
    pub verdict: SlepianVerdict,
}

/// Checks the Slepian-type ordering `P(X <= u) <= P(W <= u)` when
/// `r^1 <= r^0` entrywise, via the exact oracle for `n <= 3` and Monte
/// Carlo otherwise.
pub fn slepian_check(
    cov_x: &CorrelationMatrix,
    cov_w: &CorrelationMatrix,
    thresholds: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<SlepianReport> {
    let n = cov_x.n();
    if cov_w.n() != n {
        return Err(Error::Config("matrix dimensions differ".into()));
    }
    let mut identical = true;
    for i in 0..n {
        for j in 0..i {
            let (r1, r0) = (cov_x.get(i, j), cov_w.get(i, j));
            if r1 > r0 + BOUNDARY_TOL {
                return Err(Error::Hypothesis(format!(
                    "entrywise hypothesis violated at ({j},{i}): {r1} > {r0}"
                )));
            }
            if r1 != r0 {
                identical = false;
            }
        }
    }
    let (p_x, p_w, margin) = if n <= 3 {
        (
            orthant_prob_oracle(cov_x, thresholds)?,
            orthant_prob_oracle(cov_w, thresholds)?,
            1e-8,
        )
    } else {
        let ex = mc_orthant(cov_x, thresholds, n_samples, seed)?;
        let ew = mc_orthant(cov_w, thresholds, n_samples, seed ^ 0x5eed)?;
        (
            ex.p_hat,
            ew.p_hat,
            4.0 * (ex.std_err * ex.std_err + ew.std_err * ew.std_err).sqrt(),
        )
    };
    let verdict = if identical {
        SlepianVerdict::Equality
    } else if p_x <= p_w + margin {
        SlepianVerdict::Holds
    } else {
        SlepianVerdict::Violated
    };
    Ok(SlepianReport {
        p_x,
        p_w,
        margin,
        verdict,
    })
}
