use crate::manifest::{ManifestBuilder, RunManifest};
use crate::{Cli, Command, Failure};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;
use suptail::clt_transfer::{rr_error_bound, transfer_bound, CoefficientArray, TripleSumMode};
use suptail::instances::{random_psd_correlation, random_stationary_sequence, uniform_cd_for};
use suptail::mc::{mc_sup_tail, MCEstimate};
use suptail::orthant::orthant_prob_oracle;
use suptail::pickands::{pickands_grid_matrix, pickands_lower_surrogate};
use suptail::prime_process::{PrimeProcess, PrimeProcessConfig};
use suptail::rng::{sample_rng, Stream};
use suptail::tail_bounds::{prop1_bound, theorem1_bound, validate_cd, BoundConfig};
use suptail::{CorrelationMatrix, Error};

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Bound { config } => cmd_bound(cli, config),
        Command::Sweep {
            suite,
            corrupt_bound,
        } => cmd_sweep(cli, suite, *corrupt_bound),
        Command::Pickands {
            alpha,
            u,
            b,
            a,
            delta,
        } => cmd_pickands(cli, alpha, u, *b, *a, *delta),
        Command::Primeproc {
            x,
            y,
            e,
            k,
            b,
            block,
            samples,
            include_matrices,
        } => cmd_primeproc(cli, *x, y, e, *k, *b, *block, *samples, *include_matrices),
        Command::CltError {
            coeffs,
            a,
            b,
            mode,
            transfer_samples,
        } => cmd_clt_error(cli, coeffs, *a, *b, mode, *transfer_samples),
        Command::Mc { matrix, u, samples } => cmd_mc(cli, matrix, *u, *samples),
        Command::Oracle { matrix, thresholds } => cmd_oracle(cli, matrix, thresholds),
    }
}

fn usage<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Usage(format!("{context}: {e}"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed {what} {}: {e}", path.display())))
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .map_err(usage(&format!("cannot create {}", path.display())))?;
            f.write_all(text.as_bytes())
                .and_then(|_| { if text.ends_with('\n') { Ok(()) } else { writeln!(f) } })
                .map_err(usage("write failed"))
        }
        None => {
            println!("{}", text.trim_end_matches('\n'));
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(cli: &Cli, manifest: RunManifest, result: &T) -> Result<(), Failure> {
    let doc = json!({ "manifest": manifest, "result": result });
    emit(
        cli,
        &serde_json::to_string_pretty(&doc).map_err(usage("serialisation failed"))?,
    )
}

fn emit_csv(cli: &Cli, manifest: &RunManifest, header: &str, rows: &[String]) -> Result<(), Failure> {
    let mut text = String::new();
    text.push_str(&format!(
        "# manifest: {}\n",
        serde_json::to_string(manifest).map_err(usage("serialisation failed"))?
    ));
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    emit(cli, &text)
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

// ---------------------------------------------------------------- bound --

#[derive(Deserialize)]
struct BoundJobFile {
    matrix: String,
    #[serde(flatten)]
    config: BoundConfig,
}

fn cmd_bound(cli: &Cli, config_path: &Path) -> Result<(), Failure> {
    let job: BoundJobFile = read_json(config_path, "bound config")?;
    let matrix_path = config_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&job.matrix);
    let matrix: CorrelationMatrix = read_json(&matrix_path, "matrix file")?;
    job.config
        .validate_interface()
        .map_err(|e| Failure::Usage(format!("invalid bound config: {e}")))?;
    let echo = serde_json::to_value(&job.config).unwrap_or(Value::Null);
    let builder = ManifestBuilder::start("bound", echo, cli.seed);

    match prop1_bound(&matrix, &job.config) {
        Ok(result) => {
            if cli.format == "csv" {
                // one row per pivot, bound in a trailing summary line
                let rows: Vec<String> = result
                    .per_m
                    .iter()
                    .map(|p| {
                        format!(
                            "{},{},{},{},{}",
                            p.m,
                            fmt(p.inf_h_value),
                            fmt(p.h_at_inf),
                            p.b_delta.map_or("".into(), fmt),
                            serde_json::to_value(p.status)
                                .ok()
                                .and_then(|v| v.as_str().map(String::from))
                                .unwrap_or_default()
                        )
                    })
                    .chain([format!("# bound: {}", fmt(result.bound))])
                    .collect();
                emit_csv(
                    cli,
                    &builder.finish(),
                    "m,inf_h_value,h_at_inf,b_delta,status",
                    &rows,
                )
            } else {
                emit_json(cli, builder.finish(), &result)
            }
        }
        Err(Error::CdValidation { pivot, summary }) => {
            // embed the detailed report for the failing pivot
            let report = job
                .config
                .cd_for_pivot(&matrix, pivot)
                .ok()
                .and_then(|(c, d)| validate_cd(&matrix, pivot, &c, &d).ok());
            let doc = json!({
                "manifest": builder.finish(),
                "validation_failure": { "pivot": pivot, "summary": summary, "report": report },
            });
            emit(cli, &serde_json::to_string_pretty(&doc).unwrap())?;
            Err(Failure::Validation(format!(
                "hypothesis validation failed at pivot {pivot}: {summary}"
            )))
        }
        Err(e) => Err(Failure::Usage(format!("bound evaluation failed: {e}"))),
    }
}

// ---------------------------------------------------------------- sweep --

#[derive(Deserialize)]
struct SuiteSpec {
    #[serde(default)]
    families: Vec<Family>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Family {
    /// Stationary sequences checked against Monte Carlo.
    RandomStationary {
        count: u32,
        seed: u64,
        #[serde(default = "default_n_min")]
        n_min: usize,
        #[serde(default = "default_n_max")]
        n_max: usize,
        u: f64,
        samples: u64,
    },
    /// Small random PSD matrices checked against the exact oracle.
    RandomPsd {
        count: u32,
        seed: u64,
        u: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Sampled-kernel grids checked against Monte Carlo.
    ShaoGrid {
        alphas: Vec<f64>,
        u: f64,
        #[serde(default = "default_b_param")]
        b: f64,
        #[serde(default = "default_a_param")]
        a: f64,
        samples: u64,
        seed: u64,
    },
    /// Prime-process instances checked against Monte Carlo.
    PrimeProcess {
        xs: Vec<f64>,
        #[serde(default)]
        y_log_x: bool,
        #[serde(default)]
        k: Option<f64>,
        samples: u64,
        seed: u64,
    },
}

fn default_n_min() -> usize {
    2
}
fn default_n_max() -> usize {
    64
}
fn default_delta() -> f64 {
    0.3
}
fn default_b_param() -> f64 {
    std::f64::consts::E / 2.0
}
fn default_a_param() -> f64 {
    1.0
}

struct SweepRow {
    family: &'static str,
    index: usize,
    n: usize,
    u: f64,
    bound: f64,
    reference: f64,
    ref_std_err: f64,
    pass: bool,
}

impl SweepRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.family,
            self.index,
            self.n,
            fmt(self.u),
            fmt(self.bound),
            fmt(self.reference),
            fmt(self.ref_std_err),
            self.pass
        )
    }
}

fn cmd_sweep(cli: &Cli, suite_path: &Path, corrupt: bool) -> Result<(), Failure> {
    let text = std::fs::read_to_string(suite_path)
        .map_err(|e| Failure::Usage(format!("cannot read suite {}: {e}", suite_path.display())))?;
    let spec: SuiteSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("malformed suite: {e}")))?;
    let echo: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
    let builder = ManifestBuilder::start("sweep", echo, cli.seed);

    let corruption = if corrupt { 0.5 } else { 0.0 };
    let mut rows: Vec<SweepRow> = Vec::new();
    for family in &spec.families {
        match family {
            Family::RandomStationary {
                count,
                seed,
                n_min,
                n_max,
                u,
                samples,
            } => {
                let r1_cap = (u * u / (u * u + 2.0) - 1e-9).max(0.0);
                for i in 0..*count {
                    let inst_seed = seed.wrapping_add(i as u64);
                    let r = random_stationary_sequence(inst_seed, r1_cap);
                    let mut rng = sample_rng(inst_seed, Stream::InstanceGen, 2);
                    let n = rng.gen_range(*n_min..=*n_max);
                    let bound = theorem1_bound(&r, n, *u)
                        .map_err(|e| Failure::Usage(format!("stationary instance {i}: {e}")))?
                        + corruption;
                    let matrix = CorrelationMatrix::stationary(n, &r)
                        .map_err(|e| Failure::Usage(format!("instance {i}: {e}")))?;
                    let mc = mc_sup_tail(&matrix, *u, *samples, inst_seed)
                        .map_err(|e| Failure::Usage(format!("instance {i}: {e}")))?;
                    let reference = mc.p_hat + 4.0 * mc.std_err;
                    rows.push(SweepRow {
                        family: "random-stationary",
                        index: i as usize,
                        n,
                        u: *u,
                        bound,
                        reference,
                        ref_std_err: mc.std_err,
                        pass: bound <= reference,
                    });
                }
            }
            Family::RandomPsd {
                count,
                seed,
                u,
                delta,
            } => {
                let mut produced = 0usize;
                let mut attempt = 0u64;
                while produced < *count as usize {
                    let inst_seed = seed.wrapping_add(attempt);
                    attempt += 1;
                    if attempt > 50 * (*count as u64 + 1) {
                        return Err(Failure::Usage(
                            "random-psd family: too many rejected instances".into(),
                        ));
                    }
                    let n = 2 + (inst_seed % 2) as usize;
                    let matrix = random_psd_correlation(n, inst_seed);
                    let Some((c, d)) = uniform_cd_for(&matrix) else {
                        continue;
                    };
                    let cfg = BoundConfig::explicit(*u, 1.0 / u.max(0.25), *delta, c, d);
                    let bound = match prop1_bound(&matrix, &cfg) {
                        Ok(r) => r.bound + corruption,
                        Err(e) => {
                            return Err(Failure::Usage(format!("psd instance {attempt}: {e}")))
                        }
                    };
                    let orthant = orthant_prob_oracle(&matrix, &vec![*u; n])
                        .map_err(|e| Failure::Usage(format!("oracle: {e}")))?;
                    let reference = 1.0 - orthant + 1e-8;
                    rows.push(SweepRow {
                        family: "random-psd",
                        index: produced,
                        n,
                        u: *u,
                        bound,
                        reference,
                        ref_std_err: 0.0,
                        pass: bound <= reference,
                    });
                    produced += 1;
                }
            }
            Family::ShaoGrid {
                alphas,
                u,
                b,
                a,
                samples,
                seed,
            } => {
                for (i, &alpha) in alphas.iter().enumerate() {
                    let eval = pickands_lower_surrogate(alpha, *u, *b, *a, None)
                        .map_err(|e| Failure::Usage(format!("shao alpha {alpha}: {e}")))?;
                    let bound = eval.stationary_bound + corruption;
                    let matrix = pickands_grid_matrix(alpha, eval.m.max(2))
                        .map_err(|e| Failure::Usage(format!("shao alpha {alpha}: {e}")))?;
                    let mc = mc_sup_tail(&matrix, *u, *samples, seed.wrapping_add(i as u64))
                        .map_err(|e| Failure::Usage(format!("shao alpha {alpha}: {e}")))?;
                    let reference = mc.p_hat + 4.0 * mc.std_err;
                    rows.push(SweepRow {
                        family: "shao-grid",
                        index: i,
                        n: eval.m,
                        u: *u,
                        bound,
                        reference,
                        ref_std_err: mc.std_err,
                        pass: bound <= reference,
                    });
                }
            }
            Family::PrimeProcess {
                xs,
                y_log_x,
                k,
                samples,
                seed,
            } => {
                for (i, &x) in xs.iter().enumerate() {
                    let y = y_log_x.then(|| x.ln());
                    let cfg = PrimeProcessConfig::resolve(x, y, None, *k, None, 0)
                        .map_err(|e| Failure::Usage(format!("prime x {x}: {e}")))?;
                    let process = PrimeProcess::new(cfg)
                        .map_err(|e| Failure::Usage(format!("prime x {x}: {e}")))?;
                    let inst = process
                        .halasz_bound_instance()
                        .map_err(|e| Failure::Usage(format!("prime x {x}: {e}")))?;
                    let report = process
                        .build_block_matrix()
                        .map_err(|e| Failure::Usage(format!("prime x {x}: {e}")))?;
                    let mc = mc_sup_tail(
                        &report.exact,
                        inst.u,
                        *samples,
                        seed.wrapping_add(i as u64),
                    )
                    .map_err(|e| Failure::Usage(format!("prime x {x}: {e}")))?;
                    let bound = inst.result.bound + corruption;
                    let reference = mc.p_hat + 4.0 * mc.std_err;
                    rows.push(SweepRow {
                        family: "prime-process",
                        index: i,
                        n: report.exact.n(),
                        u: inst.u,
                        bound,
                        reference,
                        ref_std_err: mc.std_err,
                        pass: bound <= reference,
                    });
                }
            }
        }
    }

    let failures: Vec<&SweepRow> = rows.iter().filter(|r| !r.pass).collect();
    let summary = format!(
        "# instances: {}, passed: {}, failed: {}",
        rows.len(),
        rows.len() - failures.len(),
        failures.len()
    );
    let mut lines: Vec<String> = rows.iter().map(SweepRow::csv).collect();
    lines.push(summary.clone());
    emit_csv(
        cli,
        &builder.finish(),
        "family,index,n,u,bound,reference,ref_std_err,pass",
        &lines,
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        let detail = failures
            .iter()
            .map(|r| format!("{}[{}] bound {} > reference {}", r.family, r.index, r.bound, r.reference))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Failure::Soundness(format!(
            "{} soundness violation(s): {detail}",
            failures.len()
        )))
    }
}

// ------------------------------------------------------------- pickands --

fn cmd_pickands(
    cli: &Cli,
    alphas: &[f64],
    us: &[f64],
    b: f64,
    a: f64,
    delta: Option<f64>,
) -> Result<(), Failure> {
    let echo = json!({"alpha": alphas, "u": us, "b": b, "a": a, "delta": delta});
    let builder = ManifestBuilder::start("pickands", echo, cli.seed);
    let mut evals = Vec::new();
    for &alpha in alphas {
        for &u in us {
            evals.push(
                pickands_lower_surrogate(alpha, u, b, a, delta)
                    .map_err(|e| Failure::Usage(format!("alpha {alpha}, u {u}: {e}")))?,
            );
        }
    }
    if cli.format == "csv" {
        let rows: Vec<String> = evals
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt(e.alpha),
                    fmt(e.u),
                    e.m,
                    fmt(e.b),
                    fmt(e.a),
                    fmt(e.delta),
                    fmt(e.finite_u_value),
                    fmt(e.references.conjecture),
                    e.references.shao_lower.map_or("".into(), fmt),
                    fmt(e.references.dmr_lower),
                    fmt(e.references.michna_lower),
                    fmt(e.references.corollary1_shape),
                )
            })
            .collect();
        emit_csv(
            cli,
            &builder.finish(),
            "alpha,u,M,b,a,delta,finite_u_value,conjecture,shao_lower,dmr,michna,corollary1_shape",
            &rows,
        )
    } else {
        emit_json(cli, builder.finish(), &evals)
    }
}

// ------------------------------------------------------------ primeproc --

fn parse_auto(raw: &str, what: &str) -> Result<Option<f64>, Failure> {
    if raw == "auto" {
        Ok(None)
    } else {
        raw.parse::<f64>()
            .map(Some)
            .map_err(|e| Failure::Usage(format!("bad {what} value {raw}: {e}")))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_primeproc(
    cli: &Cli,
    x: f64,
    y_raw: &str,
    e_raw: &str,
    k: Option<f64>,
    b: Option<usize>,
    block: usize,
    samples: u64,
    include_matrices: bool,
) -> Result<(), Failure> {
    let y = parse_auto(y_raw, "--y")?;
    let e = parse_auto(e_raw, "--E")?;
    let cfg = PrimeProcessConfig::resolve(x, y, e, k, b, block)
        .map_err(|err| Failure::Usage(format!("config: {err}")))?;
    let echo = serde_json::to_value(&cfg).unwrap_or(Value::Null);
    let builder = ManifestBuilder::start("primeproc", echo, cli.seed);
    let process =
        PrimeProcess::new(cfg).map_err(|err| Failure::Usage(format!("sieving: {err}")))?;
    let covariance = process
        .build_block_matrix()
        .map_err(|err| Failure::Usage(format!("covariances: {err}")))?;
    let halasz = process
        .halasz_bound_instance()
        .map_err(|err| Failure::Usage(format!("bound: {err}")))?;
    let mc = mc_sup_tail(&covariance.exact, halasz.u, samples, cli.seed)
        .map_err(|err| Failure::Usage(format!("mc: {err}")))?;
    let experiment = process
        .corollary2_experiment(samples, cli.seed)
        .map_err(|err| Failure::Usage(format!("experiment: {err}")))?;

    let mut result = json!({
        "config": process.cfg,
        "n_primes": process.n_primes(),
        "max_residual": covariance.max_residual,
        "loglog_x_minus_loglog_y": covariance.loglog_x_minus_loglog_y,
        "exact_psd": covariance.exact_psd,
        "min_correlation": covariance.min_correlation,
        "min_correlation_ok": covariance.min_correlation_ok,
        "largest_admissible_m": covariance.largest_admissible_m,
        "halasz": halasz,
        "mc_sup_tail": mc,
        "experiment": experiment,
    });
    if include_matrices {
        result["exact_matrix"] = serde_json::to_value(&covariance.exact).unwrap();
        result["approx_matrix"] = serde_json::to_value(&covariance.approx).unwrap();
    }
    emit_json(cli, builder.finish(), &result)
}

// ------------------------------------------------------------ clt-error --

fn cmd_clt_error(
    cli: &Cli,
    coeffs_path: &Path,
    a: f64,
    b: f64,
    mode: &str,
    transfer_samples: Option<u64>,
) -> Result<(), Failure> {
    let coeffs: CoefficientArray = read_json(coeffs_path, "coefficient file")?;
    let mode = match mode {
        "exact" => TripleSumMode::ExactTriple,
        _ => TripleSumMode::MaxOverestimate,
    };
    let echo = json!({"coeffs": coeffs_path.display().to_string(), "a": a, "b": b,
                      "mode": mode, "transfer_samples": transfer_samples});
    let builder = ManifestBuilder::start("clt-error", echo, cli.seed);
    let report = rr_error_bound(&coeffs, a, b, mode)
        .map_err(|e| Failure::Usage(format!("error bound: {e}")))?;
    let transfer = transfer_samples
        .map(|n| transfer_bound(&coeffs, a, b, n, cli.seed))
        .transpose()
        .map_err(|e| Failure::Usage(format!("transfer check: {e}")))?;
    emit_json(
        cli,
        builder.finish(),
        &json!({"error": report, "transfer": transfer}),
    )
}

// ------------------------------------------------------------------- mc --

fn cmd_mc(cli: &Cli, matrix_path: &Path, u: f64, samples: u64) -> Result<(), Failure> {
    let matrix: CorrelationMatrix = read_json(matrix_path, "matrix file")?;
    let echo = json!({"matrix": matrix_path.display().to_string(), "u": u, "samples": samples});
    let builder = ManifestBuilder::start("mc", echo, cli.seed);
    let est: MCEstimate = mc_sup_tail(&matrix, u, samples, cli.seed)
        .map_err(|e| Failure::Usage(format!("mc: {e}")))?;
    emit_json(cli, builder.finish(), &est)
}

// --------------------------------------------------------------- oracle --

fn cmd_oracle(cli: &Cli, matrix_path: &Path, thresholds: &[f64]) -> Result<(), Failure> {
    let matrix: CorrelationMatrix = read_json(matrix_path, "matrix file")?;
    let echo = json!({"matrix": matrix_path.display().to_string(), "thresholds": thresholds});
    let builder = ManifestBuilder::start("oracle", echo, cli.seed);
    let p = orthant_prob_oracle(&matrix, thresholds)
        .map_err(|e| Failure::Usage(format!("oracle: {e}")))?;
    emit_json(cli, builder.finish(), &json!({ "probability": p }))
}

