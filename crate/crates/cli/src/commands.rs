use anyhow::{bail, Context, Result};
use kolmogorov::certificate::{assemble_certificate, Certificate};
use kolmogorov::grid::{fmt_sci, Field, Grid};
use kolmogorov::lyapunov::{
    stability_probe, theta_series, verify_differential_inequality, verify_envelope, write_series_csv, EnvelopeReport,
    InequalityReport, ProbeReport, ProbeSpec,
};
use kolmogorov::solver::{simulate, simulate_pair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{from_value, set_path, Axis, FieldInit, PairInit, RunConfig};
use crate::output::Artifacts;

/// Process exit status: success, checks failed or certificate denied.
pub const EXIT_OK: u8 = 0;
pub const EXIT_DENIED: u8 = 2;

pub struct Outcome {
    pub status: u8,
    pub summary: String,
    pub artifacts: Artifacts,
}

fn csv_field(field: &Field<f64>, grid: &Grid<f64>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    field.write_csv(grid, &mut out)?;
    Ok(out)
}

pub fn certify(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let cert = assemble_certificate(&spec, &grid, &cfg.certificate_policy()).context("certificate stage")?;
    let mut artifacts = Artifacts::default();
    artifacts.add_json("certificate.json", &cert)?;
    artifacts.milestone("epsilon_trials", cert.epsilon_trace.len());
    let summary = match (cert.granted, cert.gamma, cert.amplitude) {
        (true, Some(g), Some(z)) => format!("granted: gamma = {g}, Z = {z}"),
        _ => format!("denied at {}", cert.first_failure.as_deref().unwrap_or("?")),
    };
    Ok(Outcome {
        status: if cert.granted { EXIT_OK } else { EXIT_DENIED },
        summary,
        artifacts,
    })
}

fn permanence_box(cert: &Certificate<f64>) -> (f64, f64) {
    let upper = cert.delta_upper;
    (cert.delta_lower.unwrap_or(0.1 * upper), upper)
}

fn random_box(grid: &Grid<f64>, n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<Field<f64>> {
    if !(lo > 0.0) || !(hi >= lo) {
        bail!("random_box needs 0 < lower <= upper, got [{lo}, {hi}]");
    }
    let species = (0..n)
        .map(|_| (0..grid.node_count()).map(|_| rng.gen_range(lo..=hi)).collect())
        .collect();
    Ok(Field::from_species(grid, species)?)
}

fn initial_pair(
    cfg: &RunConfig,
    grid: &Grid<f64>,
    cert: &Certificate<f64>,
    seed: u64,
) -> Result<(Field<f64>, Field<f64>)> {
    let n = cert.n_species;
    let (dl, du) = permanence_box(cert);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = match &cfg.initial.u0 {
        FieldInit::RandomBox { lower, upper } => {
            random_box(grid, n, lower.unwrap_or(dl), upper.unwrap_or(du), &mut rng)?
        }
        FieldInit::Constant { values } => {
            if values.len() != n {
                bail!("initial.u0 needs {n} values");
            }
            Field::constant(grid, values)
        }
    };
    let v0 = match &cfg.initial.v0 {
        PairInit::Scale { factor } => {
            if !(*factor > 0.0) {
                bail!("initial.v0 scale factor must be positive");
            }
            u0.map(|x| factor * x)
        }
        PairInit::Same => u0.clone(),
        PairInit::RandomBox { lower, upper } => {
            random_box(grid, n, lower.unwrap_or(dl), upper.unwrap_or(du), &mut rng)?
        }
        PairInit::Constant { values } => {
            if values.len() != n {
                bail!("initial.v0 needs {n} values");
            }
            Field::constant(grid, values)
        }
    };
    if !u0.all_positive() || !v0.all_positive() {
        bail!("initial fields must be positive");
    }
    Ok((u0, v0))
}

#[derive(Debug, Serialize)]
struct EnvelopeSummary {
    theta_pass: bool,
    theta_max_violation: f64,
    sup_pass: bool,
    sup_max_violation: f64,
    measured_rate: Option<f64>,
    rate_at_least_gamma: Option<bool>,
    gamma: f64,
    #[serde(rename = "Z")]
    amplitude: f64,
    tol_rel: f64,
    entry_time: f64,
    entry_index: usize,
    end_index: usize,
    theta_entry: f64,
    sandwich_violations: usize,
}

#[derive(Debug, Serialize)]
struct InequalitySummary {
    holds: bool,
    pass_fraction: f64,
    checked: usize,
    skipped: usize,
    max_excess: f64,
    aggregated_holds: bool,
    aggregated_excess: f64,
}

#[derive(Debug, Serialize)]
struct Verdict {
    pass: bool,
    certificate_granted: bool,
    first_failure: Option<String>,
    /// Failed checks: `envelope_violation`, `model_tolerance`,
    /// `aggregated_identity`, `rate_below_gamma`.
    failures: Vec<&'static str>,
    degenerate: bool,
    envelope: Option<EnvelopeSummary>,
    inequality: Option<InequalitySummary>,
}

fn summarize(env: &EnvelopeReport<f64>, ineq: &InequalityReport<f64>) -> (EnvelopeSummary, InequalitySummary) {
    (
        EnvelopeSummary {
            theta_pass: env.theta_pass,
            theta_max_violation: env.theta_max_violation,
            sup_pass: env.sup_pass,
            sup_max_violation: env.sup_max_violation,
            measured_rate: env.measured_rate,
            rate_at_least_gamma: env.measured_rate.map(|r| r >= env.gamma),
            gamma: env.gamma,
            amplitude: env.amplitude,
            tol_rel: env.tol_rel,
            entry_time: env.entry_time,
            entry_index: env.entry_index,
            end_index: env.end_index,
            theta_entry: env.theta_entry,
            sandwich_violations: env.sandwich_violations,
        },
        InequalitySummary {
            holds: ineq.holds,
            pass_fraction: ineq.pass_fraction,
            checked: ineq.checked,
            skipped: ineq.skipped,
            max_excess: ineq.max_excess,
            aggregated_holds: ineq.aggregated_holds,
            aggregated_excess: ineq.aggregated_excess,
        },
    )
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let cert = assemble_certificate(&spec, &grid, &cfg.certificate_policy()).context("certificate stage")?;
    let mut artifacts = Artifacts::default();
    artifacts.add_json("certificate.json", &cert)?;
    if !cert.granted {
        let verdict = Verdict {
            pass: false,
            certificate_granted: false,
            first_failure: cert.first_failure.clone(),
            failures: vec![],
            degenerate: false,
            envelope: None,
            inequality: None,
        };
        artifacts.add_json("verdict.json", &verdict)?;
        return Ok(Outcome {
            status: EXIT_DENIED,
            summary: format!(
                "certificate denied at {}; nothing to verify",
                cert.first_failure.as_deref().unwrap_or("?")
            ),
            artifacts,
        });
    }

    let (u0, v0) = initial_pair(cfg, &grid, &cert, cfg.seed).context("initial data")?;
    let pair = simulate_pair(&spec, &grid, &u0, &v0, &cfg.solver).context("solver stage")?;
    if let Some(err) = &pair.failure {
        return Err(err.clone()).context("solver stage");
    }
    let env = verify_envelope(&pair, &cert, &cfg.verify).context("envelope stage")?;
    let ineq = verify_differential_inequality(&pair, &cert, &cfg.verify).context("inequality stage")?;

    let mut failures = Vec::new();
    if !env.pass {
        failures.push("envelope_violation");
    }
    if !ineq.holds {
        failures.push("model_tolerance");
    }
    if !ineq.aggregated_holds {
        failures.push("aggregated_identity");
    }
    if env.measured_rate.is_some_and(|r| r < env.gamma) {
        failures.push("rate_below_gamma");
    }
    let (env_summary, ineq_summary) = summarize(&env, &ineq);
    let verdict = Verdict {
        pass: failures.is_empty(),
        certificate_granted: true,
        first_failure: None,
        failures,
        degenerate: env.degenerate,
        envelope: Some(env_summary),
        inequality: Some(ineq_summary),
    };
    artifacts.add_json("verdict.json", &verdict)?;

    let series = theta_series(&pair, cert.alpha.as_deref().unwrap_or_default())?;
    let mut csv = Vec::new();
    write_series_csv(&series, Some(&env), Some(&ineq), &mut csv)?;
    artifacts.add("series/theta.csv", csv);
    let last = pair.times.len() - 1;
    artifacts.add("fields/u0.csv", csv_field(&u0, &grid)?);
    artifacts.add("fields/v0.csv", csv_field(&v0, &grid)?);
    artifacts.add("fields/u_final.csv", csv_field(&pair.u[last], &grid)?);
    artifacts.add("fields/v_final.csv", csv_field(&pair.v[last], &grid)?);
    artifacts.milestone("t_end", pair.times[last]);
    artifacts.milestone("entry_time", env.entry_time);
    artifacts.milestone("window_end", pair.times[env.end_index]);
    artifacts.milestone("solver_steps", pair.meta.steps);

    let summary = format!(
        "{}: envelope {}, inequality pass fraction {}, measured rate {} vs gamma {}",
        if verdict.pass { "pass" } else { "fail" },
        if env.pass { "holds" } else { "violated" },
        ineq.pass_fraction,
        env.measured_rate.map_or("n/a".into(), |r| r.to_string()),
        env.gamma
    );
    Ok(Outcome {
        status: if verdict.pass { EXIT_OK } else { EXIT_DENIED },
        summary,
        artifacts,
    })
}

pub fn probe(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let p = &cfg.probe;
    if p.t2.is_empty() {
        bail!("probe.t2 lists no start times");
    }
    let cert = assemble_certificate(&spec, &grid, &cfg.certificate_policy()).context("certificate stage")?;
    let horizon = p.horizon.unwrap_or(match (cert.gamma, cert.amplitude) {
        (Some(g), Some(z)) => 10.0 / g * (1e6 * z).ln(),
        _ => 10.0,
    });
    let (u0, _) = initial_pair(cfg, &grid, &cert, cfg.seed).context("initial data")?;
    let mut controls = cfg.solver.clone();
    controls.t_end = p.t2.iter().copied().fold(controls.dt, f64::max);
    let base = simulate(&spec, &grid, &u0, &controls)
        .context("solver stage")?
        .into_result()
        .context("solver stage")?;

    let mut reports: Vec<ProbeReport<f64>> = Vec::new();
    let mut artifacts = Artifacts::default();
    for (k, &t2) in p.t2.iter().enumerate() {
        let spec_k = ProbeSpec {
            t2,
            radius: p.radius,
            eps_target: p.eps_target,
            horizon,
        };
        let r = stability_probe(
            &spec,
            &grid,
            &base,
            &spec_k,
            &cfg.solver,
            cfg.seed.wrapping_add(k as u64),
        )
        .with_context(|| format!("probe at t2 = {t2}"))?;
        let mut csv = String::from("t,sup_diff\n");
        for &(t, d) in &r.trace {
            csv.push_str(&format!("{},{}\n", fmt_sci(t), fmt_sci(d)));
        }
        artifacts.add(format!("series/probe_{k}.csv"), csv.into_bytes());
        artifacts.milestone(&format!("probe_{k}_t2"), r.t2);
        artifacts.milestone(&format!("probe_{k}_settle_time"), r.settle_time);
        reports.push(r);
    }
    artifacts.add_json("probe.json", &reports)?;
    artifacts.add_json("certificate.json", &cert)?;
    let summary = reports
        .iter()
        .map(|r| {
            format!(
                "t2 = {}: initial {}, max {}, stayed below {}: {}",
                r.t2, r.initial_diff, r.max_diff, r.eps_target, r.stayed_below
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        status: EXIT_OK,
        summary,
        artifacts,
    })
}

/// All combinations of axis values, first axis slowest; axes without values
/// are ignored.
pub fn sweep_points(axes: &[Axis]) -> Vec<Vec<(usize, f64)>> {
    let active: Vec<(usize, &Axis)> = axes.iter().enumerate().filter(|(_, a)| !a.values.is_empty()).collect();
    let mut points = vec![Vec::new()];
    for (idx, axis) in active {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((idx, v));
                    q
                })
            })
            .collect();
    }
    points
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

struct PointResult {
    row: Vec<String>,
    artifacts: Artifacts,
}

fn run_point(
    base: &Value,
    axes: &[Axis],
    point: &[(usize, f64)],
    verify_too: bool,
) -> Result<(Certificate<f64>, Artifacts, Option<bool>)> {
    let mut value = base.clone();
    for &(idx, x) in point {
        for path in &axes[idx].paths {
            set_path(&mut value, path, x)?;
        }
    }
    let cfg = from_value(value)?;
    let spec = cfg.spec()?;
    let grid = cfg.grid()?;
    let cert = assemble_certificate(&spec, &grid, &cfg.certificate_policy())?;
    if verify_too && cert.granted {
        let outcome = verify(&cfg)?;
        return Ok((cert, outcome.artifacts, Some(outcome.status == EXIT_OK)));
    }
    let mut artifacts = Artifacts::default();
    artifacts.add_json("certificate.json", &cert)?;
    Ok((cert, artifacts, None))
}

pub fn sweep(base: &Value, axes: &[Axis], workers: usize) -> Result<Outcome> {
    let cfg = from_value(base.clone())?;
    let points = sweep_points(axes);
    let labels: Vec<String> = axes
        .iter()
        .filter(|a| !a.values.is_empty())
        .map(|a| a.paths.join("+"))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker pool")?;
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|point| {
                let mut row: Vec<String> = point.iter().map(|(_, v)| v.to_string()).collect();
                match run_point(base, axes, point, cfg.sweep.verify) {
                    Ok((cert, artifacts, envelope)) => {
                        row.extend([
                            cert.granted.to_string(),
                            cert.first_failure.clone().unwrap_or_default(),
                            join(&cert.ac.margins),
                            join(&cert.ac_prime.margins),
                            cert.cond21.as_ref().map(|c| join(&c.margins)).unwrap_or_default(),
                            cert.delta_lower.map(|v| v.to_string()).unwrap_or_default(),
                            cert.delta_upper.to_string(),
                            cert.gamma.map(|v| v.to_string()).unwrap_or_default(),
                            cert.amplitude.map(|v| v.to_string()).unwrap_or_default(),
                            envelope.map(|p| p.to_string()).unwrap_or_default(),
                            String::new(),
                        ]);
                        PointResult { row, artifacts }
                    }
                    Err(e) => {
                        row.extend(std::iter::repeat(String::new()).take(10));
                        row.push(format!("{e:#}").replace([',', '\n'], ";"));
                        PointResult {
                            row,
                            artifacts: Artifacts::default(),
                        }
                    }
                }
            })
            .collect()
    });

    let mut header = vec!["point".to_string()];
    header.extend(labels);
    header.extend(
        [
            "granted",
            "first_failure",
            "ac_margins",
            "ac_prime_margins",
            "cond21_margins",
            "delta_lower",
            "delta_upper",
            "gamma",
            "Z",
            "envelope_pass",
            "error",
        ]
        .map(String::from),
    );
    let mut csv = header.join(",") + "\n";
    let mut artifacts = Artifacts::default();
    let (mut granted, mut errors) = (0, 0);
    for (k, r) in results.into_iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(r.row);
        let n = row.len();
        granted += usize::from(row[n - 11] == "true");
        errors += usize::from(!row[n - 1].is_empty());
        csv.push_str(&row.join(","));
        csv.push('\n');
        artifacts.nest(&format!("point_{k:04}"), r.artifacts);
    }
    artifacts.add("sweep.csv", csv.into_bytes());
    artifacts.milestone("points", points.len());
    Ok(Outcome {
        status: EXIT_OK,
        summary: format!("{} points: {granted} granted, {errors} failed to run", points.len()),
        artifacts,
    })
}
