//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (visible under `--nocapture`). Criteria verify
//! soundness of every bound against exact oracles or Monte-Carlo references
//! at pinned tolerances; the headline limits of the underlying theory are
//! asymptotic and are deliberately not claimed here.

use rand::Rng;
use std::process::Command;
use suptail::clt_transfer::{
    rr_error_bound, smoothing_value, transfer_bound, CoefficientArray, TripleSumMode,
    SMOOTHING_C1, SMOOTHING_C2, SMOOTHING_C3,
};
use suptail::instances::{random_psd_correlation, random_stationary_sequence, uniform_cd_for};
use suptail::mc::mc_sup_tail;
use suptail::orthant::orthant_prob_oracle;
use suptail::pickands::{pickands_lower_surrogate, reference_bounds};
use suptail::prime_process::{PrimeProcess, PrimeProcessConfig};
use suptail::rng::{sample_rng, Stream};
use suptail::tail_bounds::{
    comparison_bound, prop1_bound, theorem1_bound, BoundConfig, ComparisonVariant,
};
use suptail::CorrelationMatrix;

#[test]
fn criterion_01_oracle_soundness() {
    // 500 random n in {2, 3} matrices with valid (c, d); the bound must sit
    // below the exact orthant complement at every level, slack 1e-8.
    let levels = [0.5, 1.0, 2.0, 3.0];
    let mut tested = 0usize;
    let mut seed = 0u64;
    let mut worst = f64::NEG_INFINITY;
    while tested < 500 {
        seed += 1;
        let n = 2 + (seed % 2) as usize;
        let matrix = random_psd_correlation(n, seed);
        let Some((c, d)) = uniform_cd_for(&matrix) else {
            continue;
        };
        for &u in &levels {
            let cfg = BoundConfig::explicit(u, 1.0 / u, 0.3, c.clone(), d.clone());
            let res = prop1_bound(&matrix, &cfg).expect("bound must evaluate");
            let orthant = orthant_prob_oracle(&matrix, &vec![u; n]).expect("oracle");
            let violation = res.bound - (1.0 - orthant);
            worst = worst.max(violation);
            assert!(
                violation <= 1e-8,
                "seed {seed}, u {u}: bound {} vs 1 - orthant {}",
                res.bound,
                1.0 - orthant
            );
        }
        tested += 1;
    }
    println!(
        "[PASS] oracle-soundness: 500 instances x 4 levels, worst margin {worst:.3e} (tolerance 1e-8)"
    );
}

#[test]
fn criterion_02_mc_soundness() {
    // 100 random stationary instances, n <= 256, one million samples each.
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let mut rng = sample_rng(1000 + i, Stream::InstanceGen, 4);
        let u: f64 = [2.0, 2.5, 3.0][(i % 3) as usize];
        let r1_cap = u * u / (u * u + 2.0) - 1e-6;
        let r = random_stationary_sequence(2000 + i, r1_cap);
        let n: usize = rng.gen_range(2..=256);
        let bound = theorem1_bound(&r, n, u).expect("theorem bound");
        let matrix = CorrelationMatrix::stationary(n, &r).unwrap();
        let mc = mc_sup_tail(&matrix, u, 1_000_000, 3000 + i).unwrap();
        let slack = mc.p_hat + 4.0 * mc.std_err - bound;
        worst = worst.max(-slack);
        assert!(
            slack >= 0.0,
            "instance {i} (n = {n}, u = {u}): bound {bound} vs mc {} + 4se",
            mc.p_hat
        );
    }
    println!(
        "[PASS] mc-soundness: 100 stationary instances (n <= 256, 1e6 samples), worst margin {worst:.3e}"
    );
}

#[test]
fn criterion_03_pickands_anchors() {
    let b = std::f64::consts::E / 2.0;
    let e1 = pickands_lower_surrogate(1.0, 6.0, b, 1.0, Some(1.0)).unwrap();
    assert!(
        e1.finite_u_value <= 1.0 + 0.05,
        "alpha 1 surrogate {} exceeds H_1 + 0.05",
        e1.finite_u_value
    );
    let h2 = 1.0 / std::f64::consts::PI.sqrt();
    let e2 = pickands_lower_surrogate(2.0, 6.0, b, 1.0, None).unwrap();
    assert!(
        e2.finite_u_value <= h2 + 0.05,
        "alpha 2 surrogate {} exceeds H_2 + 0.05",
        e2.finite_u_value
    );
    println!(
        "[PASS] pickands-anchors: alpha=1 gives {:.3e} <= 1.05; alpha=2 gives {:.3e} <= {:.4}",
        e1.finite_u_value,
        e2.finite_u_value,
        h2 + 0.05
    );
}

#[test]
fn criterion_04_reference_bound_ordering() {
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=50 {
        let alpha = i as f64 / 50.0;
        let r = reference_bounds(alpha).unwrap();
        let gap1 = r.dmr_lower - r.michna_lower;
        let gap2 = r.michna_lower - r.conjecture;
        worst = worst.max(gap1).max(gap2);
        assert!(gap1 <= 1e-12, "alpha {alpha}: dmr > michna");
        assert!(gap2 <= 1e-12, "alpha {alpha}: michna > conjecture");
    }
    println!(
        "[PASS] reference-ordering: dmr <= michna <= conjecture on 50 alphas, worst gap {worst:.3e}"
    );
}

#[test]
fn criterion_05_comparison_dominance() {
    // 500 random n = 2 instances with r1 >= r0: the true orthant difference
    // is below each of the three bounds, and the integral form is below the
    // arcsine form.
    let mut worst = f64::NEG_INFINITY;
    for i in 0..500u64 {
        let mut rng = sample_rng(500 + i, Stream::InstanceGen, 5);
        let r0: f64 = rng.gen_range(-0.95..0.90);
        let r1: f64 = rng.gen_range(r0..0.95);
        let u1: f64 = rng.gen_range(-2.0..3.0);
        let u2: f64 = rng.gen_range(-2.0..3.0);
        if u1 * u1 + u2 * u2 < 1e-6 {
            continue;
        }
        let x = CorrelationMatrix::equicorrelated(2, r1).unwrap();
        let w = CorrelationMatrix::equicorrelated(2, r0).unwrap();
        let thresholds = [u1, u2];
        let px = orthant_prob_oracle(&x, &thresholds).unwrap();
        let pw = orthant_prob_oracle(&w, &thresholds).unwrap();
        let true_diff = px - pw;
        let v1 = comparison_bound(&x, &w, &thresholds, ComparisonVariant::Integral).unwrap();
        let v2 = comparison_bound(&x, &w, &thresholds, ComparisonVariant::ArcSine).unwrap();
        let v3 = comparison_bound(&x, &w, &thresholds, ComparisonVariant::ClosedForm).unwrap();
        for (name, v) in [("integral", v1), ("arcsine", v2), ("closed-form", v3)] {
            worst = worst.max(true_diff - v);
            assert!(
                true_diff <= v + 1e-8,
                "instance {i}: true diff {true_diff} exceeds {name} bound {v}"
            );
        }
        worst = worst.max(v1 - v2);
        assert!(v1 <= v2 + 1e-8, "instance {i}: integral {v1} > arcsine {v2}");
    }
    println!(
        "[PASS] comparison-dominance: 500 ordered pairs, worst margin {worst:.3e} (tolerance 1e-8)"
    );
}

#[test]
fn criterion_06_prime_residual_shape() {
    // Family y = log x, K = 1; recorded flat ceiling 0.30 for
    // max_residual * loglog x across the x grid (a non-increasing-or-flat
    // sequence of recorded constants).
    let recorded_ceilings = [0.30, 0.30, 0.30];
    for (i, c) in recorded_ceilings.iter().enumerate().skip(1) {
        assert!(*c <= recorded_ceilings[i - 1], "ceilings must not increase");
    }
    let mut observed = Vec::new();
    for (&x, &ceiling) in [1e4, 1e5, 1e6].iter().zip(&recorded_ceilings) {
        let cfg =
            PrimeProcessConfig::resolve(x, Some(x.ln()), None, Some(1.0), None, 0).unwrap();
        let process = PrimeProcess::new(cfg).unwrap();
        assert!(process.cfg.big_m >= 2, "x = {x}: grid too small");
        let report = process.build_block_matrix().unwrap();
        let value = report.max_residual * process.cfg.loglog_x;
        observed.push(value);
        assert!(
            value <= ceiling,
            "x = {x}: residual * loglog x = {value} exceeds recorded {ceiling}"
        );
    }
    println!(
        "[PASS] prime-residual: residual * loglog x = {:?} under flat ceiling 0.30",
        observed
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_07_halasz_instance_soundness() {
    // Default configuration at x = 1e6, one million samples.
    let cfg = PrimeProcessConfig::resolve(1e6, None, None, None, None, 0).unwrap();
    let process = PrimeProcess::new(cfg).unwrap();
    let inst = process.halasz_bound_instance().unwrap();
    let report = process.build_block_matrix().unwrap();
    let mc = mc_sup_tail(&report.exact, inst.u, 1_000_000, 77).unwrap();
    let slack = mc.p_hat + 4.0 * mc.std_err - inst.result.bound;
    assert!(
        slack >= 0.0,
        "default instance: bound {} vs mc {} + 4se",
        inst.result.bound,
        mc.p_hat
    );
    // richer grid (y = log x, K = 1) as a second instance of the same check
    let cfg2 =
        PrimeProcessConfig::resolve(1e6, Some((1e6f64).ln()), None, Some(1.0), None, 0).unwrap();
    let process2 = PrimeProcess::new(cfg2).unwrap();
    let inst2 = process2.halasz_bound_instance().unwrap();
    let report2 = process2.build_block_matrix().unwrap();
    let mc2 = mc_sup_tail(&report2.exact, inst2.u, 1_000_000, 78).unwrap();
    let slack2 = mc2.p_hat + 4.0 * mc2.std_err - inst2.result.bound;
    assert!(slack2 >= 0.0, "rich instance: bound {}", inst2.result.bound);
    println!(
        "[PASS] halasz-soundness: default bound {:.3e} (mc {:.3e}), rich bound {:.3e} (mc {:.3e})",
        inst.result.bound, mc.p_hat, inst2.result.bound, mc2.p_hat
    );
}

#[test]
fn criterion_08_clt_transfer() {
    // 20 random coefficient arrays, one million samples per side, plus
    // exact cubic homogeneity.
    let mut worst_slack = f64::INFINITY;
    for i in 0..20u64 {
        let mut rng = sample_rng(4000 + i, Stream::InstanceGen, 6);
        let n: usize = rng.gen_range(5..=50);
        let t: usize = rng.gen_range(2..=8);
        let scale = (n as f64).sqrt();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..t).map(|_| rng.gen_range(-1.0..1.0) / scale).collect())
            .collect();
        let coeffs = CoefficientArray::from_rows(rows).unwrap();
        let rep = transfer_bound(&coeffs, 0.3, 0.8, 1_000_000, 4100 + i).unwrap();
        worst_slack = worst_slack.min(rep.slack);
        assert!(
            rep.holds,
            "array {i} (n = {n}, T = {t}): transfer inequality violated, slack {}",
            rep.slack
        );
    }
    // cubic homogeneity, exact to 1e-12 relative
    let coeffs = CoefficientArray::from_rows(vec![
        vec![0.4, -0.8, 0.1],
        vec![1.2, 0.3, -0.5],
        vec![-0.2, 0.6, 0.9],
    ])
    .unwrap();
    let base = rr_error_bound(&coeffs, 0.0, 0.7, TripleSumMode::ExactTriple).unwrap();
    let lambda = 1e-3;
    let scaled = rr_error_bound(
        &coeffs.scaled(lambda).unwrap(),
        0.0,
        0.7,
        TripleSumMode::ExactTriple,
    )
    .unwrap();
    let rel = (scaled.total_error / base.total_error - lambda.powi(3)).abs() / lambda.powi(3);
    assert!(rel <= 1e-12, "homogeneity relative error {rel}");
    println!(
        "[PASS] clt-transfer: 20 arrays (1e6 samples/side), min slack {worst_slack:.3e}; homogeneity rel err {rel:.3e}"
    );
}

#[test]
fn criterion_09_smoothing_function() {
    let (a, b) = (0.0, 1.0);
    // boundary values and derivatives, exact to 1e-12
    for (z, want) in [(a, 1.0), (b, 0.0)] {
        let v = smoothing_value(z, a, b).unwrap();
        assert!((v[0] - want).abs() <= 1e-12);
        for r in 1..=3 {
            assert!(v[r].abs() <= 1e-12, "derivative {r} at boundary: {}", v[r]);
        }
    }
    // finite differences at 100 interior points, 1e-5 relative with a scale
    // guard near the derivative's zeros
    let eps = 1e-5;
    let caps = [1.0, SMOOTHING_C1, SMOOTHING_C2, SMOOTHING_C3];
    let mut worst = 0.0f64;
    for k in 0..100 {
        let z = (k as f64 + 0.5) / 100.0;
        let v = smoothing_value(z, a, b).unwrap();
        let plus = smoothing_value(z + eps, a, b).unwrap();
        let minus = smoothing_value(z - eps, a, b).unwrap();
        for r in 1..=3usize {
            let fd = (plus[r - 1] - minus[r - 1]) / (2.0 * eps);
            let tol = 1e-5 * v[r].abs().max(1e-3 * caps[r]);
            let err = (fd - v[r]).abs();
            worst = worst.max(err / v[r].abs().max(1e-3 * caps[r]));
            assert!(err <= tol, "order {r} at z = {z}: fd error {err}");
        }
    }
    println!(
        "[PASS] smoothing: boundaries exact to 1e-12, finite-difference worst relative error {worst:.3e} <= 1e-5"
    );
}

#[test]
fn criterion_10_sweep_reproducibility() {
    // The full sweep, run twice with identical manifests (different thread
    // counts), must produce byte-identical numeric output. The manifest
    // line carries wall-clock timestamps and is excluded.
    let dir = tempfile::tempdir().unwrap();
    let suite_path = dir.path().join("suite.json");
    std::fs::write(
        &suite_path,
        r#"{"families":[
            {"kind":"random-psd","count":10,"seed":21,"u":1.0},
            {"kind":"random-stationary","count":3,"seed":22,"n_min":2,"n_max":32,"u":2.0,"samples":100000},
            {"kind":"shao-grid","alphas":[0.5],"u":4.0,"samples":100000,"seed":23},
            {"kind":"prime-process","xs":[1e4],"y_log_x":true,"k":1.0,"samples":100000,"seed":24}
        ]}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out_path = dir.path().join(format!("sweep_{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_suptail"))
            .args([
                "sweep",
                "--suite",
                suite_path.to_str().unwrap(),
                "--threads",
                threads,
                "--seed",
                "42",
                "--out",
                out_path.to_str().unwrap(),
            ])
            .status()
            .expect("spawn sweep");
        assert!(status.success(), "sweep failed with threads = {threads}");
        let text = std::fs::read_to_string(&out_path).unwrap();
        let numeric: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect();
        assert!(numeric.len() > 10);
        outputs.push(numeric.join("\n"));
    }
    assert_eq!(
        outputs[0].as_bytes(),
        outputs[1].as_bytes(),
        "numeric sweep output differs between identical-manifest runs"
    );
    println!(
        "[PASS] reproducibility: two identical-manifest sweep runs produced byte-identical numeric output ({} bytes)",
        outputs[0].len()
    );
}
