//! The functional `Theta = sum alpha_i sup_x |ln(u_i / v_i)|` along pairs of
//! solutions, its differential inequality, the exponential envelope and
//! empirical stability probes.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::grid::{fmt_sci, Field, Grid, GridDescriptor};
use crate::model::SystemSpec;
use crate::scalar::{max_of, min_of, Scalar};
use crate::solver::{simulate_pair_from, SolveControls, SolverMeta, Trajectory};

/// Synchronized snapshots of two positive solutions.
#[derive(Debug, Clone)]
pub struct PairTrajectory<T> {
    pub grid: GridDescriptor<T>,
    pub times: Vec<T>,
    pub u: Vec<Field<T>>,
    pub v: Vec<Field<T>>,
    pub meta: SolverMeta<T>,
    pub failure: Option<Error>,
}

fn check_pair<T: Scalar>(u: &Field<T>, v: &Field<T>) -> Result<()> {
    if !u.same_layout(v) {
        return Err(Error::invalid("fields live on different grids"));
    }
    if let Some(k) = u.values().iter().chain(v.values()).position(|&x| !(x > T::zero())) {
        return Err(Error::invalid(format!("field value #{k} is not positive")));
    }
    Ok(())
}

/// Per-species `sup_x |ln(u_i / v_i)|` over all nodes.
pub fn theta_components<T: Scalar>(u: &Field<T>, v: &Field<T>) -> Result<Vec<T>> {
    check_pair(u, v)?;
    Ok((0..u.n_species())
        .map(|s| {
            u.species(s)
                .iter()
                .zip(v.species(s))
                .map(|(&a, &b)| (a / b).ln().abs())
                .fold(T::zero(), T::max)
        })
        .collect())
}

/// `(Theta, Theta_i)` for weights `alpha`.
pub fn theta<T: Scalar>(u: &Field<T>, v: &Field<T>, alpha: &[T]) -> Result<(T, Vec<T>)> {
    if alpha.len() != u.n_species() || alpha.iter().any(|&a| !(a > T::zero())) {
        return Err(Error::invalid("weights must be positive, one per species"));
    }
    let parts = theta_components(u, v)?;
    let total = parts.iter().zip(alpha).map(|(&t, &a)| t * a).sum();
    Ok((total, parts))
}

/// `sum_i sup_x |u_i - v_i|`.
pub fn sup_difference<T: Scalar>(u: &Field<T>, v: &Field<T>) -> Result<T> {
    if !u.same_layout(v) {
        return Err(Error::invalid("fields live on different grids"));
    }
    Ok((0..u.n_species())
        .map(|s| {
            u.species(s)
                .iter()
                .zip(v.species(s))
                .map(|(&a, &b)| (a - b).abs())
                .fold(T::zero(), T::max)
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormEquivalence<T> {
    /// False when some value lies outside `[delta_lower, delta_upper]`; the
    /// margins are then not meaningful.
    pub in_box: bool,
    pub holds: bool,
    /// Smallest `|ln(u/v)| - |u - v| / delta_upper` over nodes and species.
    pub lower_margin: T,
    /// Smallest `|u - v| / delta_lower - |ln(u/v)|` over nodes and species.
    pub upper_margin: T,
    /// First out-of-box value as `(species, node, value)`.
    pub outside: Option<(usize, usize, T)>,
}

/// Checks `|u - v| / delta_upper <= |ln(u / v)| <= |u - v| / delta_lower` at
/// every node, with an absolute slack of `1e-12`.
pub fn norm_equivalence_check<T: Scalar>(
    u: &Field<T>,
    v: &Field<T>,
    delta_lower: T,
    delta_upper: T,
) -> Result<NormEquivalence<T>> {
    check_pair(u, v)?;
    if !(delta_lower > T::zero()) || !(delta_upper >= delta_lower) {
        return Err(Error::Precondition("need 0 < delta_lower <= delta_upper".into()));
    }
    let mut outside = None;
    let (mut lower_margin, mut upper_margin) = (T::infinity(), T::infinity());
    for s in 0..u.n_species() {
        for (m, (&a, &b)) in u.species(s).iter().zip(v.species(s)).enumerate() {
            if outside.is_none() {
                if let Some(&x) = [a, b].iter().find(|&&x| x < delta_lower || x > delta_upper) {
                    outside = Some((s, m, x));
                }
            }
            let log = (a / b).ln().abs();
            let diff = (a - b).abs();
            lower_margin = lower_margin.min(log - diff / delta_upper);
            upper_margin = upper_margin.min(diff / delta_lower - log);
        }
    }
    let slack = T::lit(-1e-12);
    Ok(NormEquivalence {
        in_box: outside.is_none(),
        holds: outside.is_none() && lower_margin >= slack && upper_margin >= slack,
        lower_margin,
        upper_margin,
        outside,
    })
}

fn field_in_box<T: Scalar>(f: &Field<T>, lo: T, hi: T) -> bool {
    f.values().iter().all(|&x| x >= lo && x <= hi)
}

/// First snapshot index from which both solutions stay inside
/// `[delta_lower - tol, delta_upper + tol]` at every later snapshot.
pub fn entry_index<T: Scalar>(pair: &PairTrajectory<T>, delta_lower: T, delta_upper: T, tol: T) -> Option<usize> {
    let (lo, hi) = (delta_lower - tol, delta_upper + tol);
    let mut entry = None;
    for k in (0..pair.times.len()).rev() {
        if field_in_box(&pair.u[k], lo, hi) && field_in_box(&pair.v[k], lo, hi) {
            entry = Some(k);
        } else {
            break;
        }
    }
    entry
}

/// `Theta`, its components and the sup-norm distance at every snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ThetaSeries<T> {
    pub times: Vec<T>,
    pub alpha: Vec<T>,
    pub theta: Vec<T>,
    /// `components[k][i]` is `Theta_i(t_k)`.
    pub components: Vec<Vec<T>>,
    pub sup_diff: Vec<T>,
}

pub fn theta_series<T: Scalar>(pair: &PairTrajectory<T>, alpha: &[T]) -> Result<ThetaSeries<T>> {
    let mut series = ThetaSeries {
        times: pair.times.clone(),
        alpha: alpha.to_vec(),
        theta: Vec::with_capacity(pair.times.len()),
        components: Vec::with_capacity(pair.times.len()),
        sup_diff: Vec::with_capacity(pair.times.len()),
    };
    for (u, v) in pair.u.iter().zip(&pair.v) {
        let (total, parts) = theta(u, v, alpha)?;
        series.theta.push(total);
        series.components.push(parts);
        series.sup_diff.push(sup_difference(u, v)?);
    }
    Ok(series)
}

/// Forward difference `(Theta_i(t_{k+1}) - Theta_i(t_k)) / (t_{k+1} - t_k)`,
/// the discrete stand-in for the upper Dini derivative.
pub fn dini_estimate<T: Scalar>(series: &ThetaSeries<T>, k: usize) -> Result<Vec<T>> {
    if k + 1 >= series.times.len() {
        return Err(Error::invalid(format!(
            "forward difference needs snapshot {} but only {} exist",
            k + 1,
            series.times.len()
        )));
    }
    let h = series.times[k + 1] - series.times[k];
    Ok(series.components[k + 1]
        .iter()
        .zip(&series.components[k])
        .map(|(&b, &a)| (b - a) / h)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct VerifyOptions<T> {
    /// Relative slack of the envelope checks.
    pub tol_rel: T,
    /// Constant tolerance for the differential inequality; when unset the
    /// model `10 h |RHS| + 1e-6` with snapshot spacing `h` is used.
    pub tol_model: Option<T>,
    /// Slack on box membership when locating the entry time.
    pub entry_tol: T,
    /// Length of the checked window after the entry time; whole run if unset.
    pub window: Option<T>,
    /// Fraction of snapshots that must satisfy the differential inequality.
    pub min_pass_fraction: T,
}

impl<T: Scalar> Default for VerifyOptions<T> {
    fn default() -> Self {
        VerifyOptions {
            tol_rel: T::lit(1e-2),
            tol_model: None,
            entry_tol: T::lit(1e-6),
            window: None,
            min_pass_fraction: T::lit(0.99),
        }
    }
}

fn require_granted<T: Scalar>(cert: &Certificate<T>) -> Result<(T, T, &[T], T, T, T)> {
    match (&cert.alpha, cert.delta_lower, cert.slack, cert.gamma, cert.amplitude) {
        (Some(alpha), Some(dl), Some(slack), Some(gamma), Some(z)) if cert.granted => {
            Ok((dl, cert.delta_upper, alpha, slack, gamma, z))
        }
        _ => Err(Error::Precondition(format!(
            "certificate was denied ({}); envelope constants are undefined",
            cert.first_failure.as_deref().unwrap_or("unknown")
        ))),
    }
}

/// Snapshot range `[entry, end]` covered by the window.
fn window_range<T: Scalar>(
    pair: &PairTrajectory<T>,
    dl: T,
    du: T,
    options: &VerifyOptions<T>,
) -> Result<(usize, usize)> {
    let entry = entry_index(pair, dl, du, options.entry_tol).ok_or_else(|| {
        Error::Precondition(format!(
            "the pair never settles in [{dl}, {du}] within the simulated span"
        ))
    })?;
    let last = pair.times.len() - 1;
    let end = match options.window {
        Some(w) => {
            let limit = pair.times[entry] + w * (T::one() + T::epsilon() * T::lit(16.0));
            pair.times.partition_point(|&t| t <= limit).saturating_sub(1).min(last)
        }
        None => last,
    };
    Ok((entry, end))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InequalityReport<T> {
    pub entry_index: usize,
    pub entry_time: T,
    /// Snapshots before the entry time, not checked.
    pub skipped: usize,
    pub checked: usize,
    pub passed: usize,
    pub pass_fraction: T,
    pub holds: bool,
    /// Largest `residual - tol_model` over checked snapshots and species.
    pub max_excess: T,
    /// Per checked snapshot: `D Theta_i - RHS_i`.
    pub residuals: Vec<Vec<T>>,
    pub rhs: Vec<Vec<T>>,
    pub tol_model: Vec<T>,
    /// Largest excess in `sum alpha_i RHS_i <= -eps* sum Theta_i <= -gamma Theta`.
    pub aggregated_excess: T,
    pub aggregated_holds: bool,
}

/// Compares forward differences of `Theta_i` with
/// `-delta_lower b_lower_ii Theta_i + delta_upper sum_{j != i} b_upper_ij Theta_j`
/// on the snapshots after the entry time.
pub fn verify_differential_inequality<T: Scalar>(
    pair: &PairTrajectory<T>,
    cert: &Certificate<T>,
    options: &VerifyOptions<T>,
) -> Result<InequalityReport<T>> {
    let (dl, du, alpha, slack, gamma, _) = require_granted(cert)?;
    let (entry, end) = window_range(pair, dl, du, options)?;
    let series = theta_series(pair, alpha)?;
    let b = &cert.bounds;
    let n = alpha.len();
    let mut report = InequalityReport {
        entry_index: entry,
        entry_time: pair.times[entry],
        skipped: entry,
        checked: 0,
        passed: 0,
        pass_fraction: T::one(),
        holds: true,
        max_excess: T::neg_infinity(),
        residuals: Vec::new(),
        rhs: Vec::new(),
        tol_model: Vec::new(),
        aggregated_excess: T::neg_infinity(),
        aggregated_holds: true,
    };
    let exact_tol = T::lit(1e-12);
    for k in entry..end {
        let th = &series.components[k];
        let rhs: Vec<T> = (0..n)
            .map(|i| {
                let cross: T = (0..n).filter(|&j| j != i).map(|j| b.b_upper[i][j] * th[j]).sum();
                -dl * b.b_lower[i] * th[i] + du * cross
            })
            .collect();
        let dini = dini_estimate(&series, k)?;
        let h = series.times[k + 1] - series.times[k];
        let tol = options
            .tol_model
            .unwrap_or_else(|| T::lit(10.0) * h * rhs.iter().fold(T::zero(), |a, r| a.max(r.abs())) + T::lit(1e-6));
        let residual: Vec<T> = dini.iter().zip(&rhs).map(|(&d, &r)| d - r).collect();
        let excess = max_of(&residual) - tol;
        report.max_excess = report.max_excess.max(excess);
        report.checked += 1;
        if excess <= T::zero() {
            report.passed += 1;
        }

        let weighted: T = alpha.iter().zip(&rhs).map(|(&a, &r)| a * r).sum();
        let sum_theta: T = th.iter().copied().sum();
        let scale = T::one().max(weighted.abs()).max(sum_theta);
        let first = weighted + slack * sum_theta;
        let second = -slack * sum_theta + gamma * series.theta[k];
        let agg = first.max(second) / scale;
        report.aggregated_excess = report.aggregated_excess.max(agg);
        report.aggregated_holds &= agg <= exact_tol;

        report.residuals.push(residual);
        report.rhs.push(rhs);
        report.tol_model.push(tol);
    }
    if report.checked > 0 {
        report.pass_fraction = T::from_count(report.passed) / T::from_count(report.checked);
    }
    report.holds = report.pass_fraction >= options.min_pass_fraction;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EnvelopeReport<T> {
    /// `Theta(T~) = 0`: nothing to decay, passes trivially.
    pub degenerate: bool,
    pub entry_index: usize,
    pub entry_time: T,
    pub end_index: usize,
    pub theta_entry: T,
    pub sup_diff_entry: T,
    pub gamma: T,
    #[serde(rename = "Z")]
    pub amplitude: T,
    pub tol_rel: T,
    pub theta_pass: bool,
    /// Largest `Theta(t) / envelope(t) - 1`.
    pub theta_max_violation: T,
    pub sup_pass: bool,
    pub sup_max_violation: T,
    pub pass: bool,
    /// Decay rate fitted to `ln Theta` over the final half of the window.
    pub measured_rate: Option<T>,
    /// Snapshots where the norm sandwich fails beyond `1e-12` (in-box ones only).
    pub sandwich_violations: usize,
    /// `Theta(T~) exp(-gamma (t - T~))` per snapshot of the window.
    pub theta_envelope: Vec<T>,
    pub sup_envelope: Vec<T>,
}

/// Least-squares slope of `ln y` against `t`, negated.
fn fitted_decay_rate<T: Scalar>(times: &[T], values: &[T], floor: T) -> Option<T> {
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > floor && y.is_finite())
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let count = T::from_count(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / count;
    let my = pts.iter().map(|p| p.1).sum::<T>() / count;
    let sxx: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > T::zero()).then(|| -sxy / sxx)
}

/// Checks `Theta(t) <= Theta(T~) exp(-gamma (t - T~))` and
/// `sum sup|u_i - v_i|(t) <= Z sum sup|u_i - v_i|(T~) exp(-gamma (t - T~))`,
/// each up to the factor `1 + tol_rel`, over the window after `T~`.
pub fn verify_envelope<T: Scalar>(
    pair: &PairTrajectory<T>,
    cert: &Certificate<T>,
    options: &VerifyOptions<T>,
) -> Result<EnvelopeReport<T>> {
    let (dl, du, alpha, _, gamma, z) = require_granted(cert)?;
    let (entry, end) = window_range(pair, dl, du, options)?;
    let series = theta_series(pair, alpha)?;
    let t0 = series.times[entry];
    let theta0 = series.theta[entry];
    let sup0 = series.sup_diff[entry];
    let (amax, amin) = (max_of(alpha), min_of(alpha));
    let mut report = EnvelopeReport {
        degenerate: theta0 == T::zero(),
        entry_index: entry,
        entry_time: t0,
        end_index: end,
        theta_entry: theta0,
        sup_diff_entry: sup0,
        gamma,
        amplitude: z,
        tol_rel: options.tol_rel,
        theta_pass: true,
        theta_max_violation: T::zero(),
        sup_pass: true,
        sup_max_violation: T::zero(),
        pass: true,
        measured_rate: None,
        sandwich_violations: 0,
        theta_envelope: Vec::with_capacity(end - entry + 1),
        sup_envelope: Vec::with_capacity(end - entry + 1),
    };
    let tiny = T::lit(1e-12);
    for k in entry..=end {
        let decay = (-gamma * (series.times[k] - t0)).exp();
        let env = theta0 * decay;
        let sup_env = z * sup0 * decay;
        report.theta_envelope.push(env);
        report.sup_envelope.push(sup_env);
        if !report.degenerate {
            let v = series.theta[k] / env - T::one();
            report.theta_max_violation = report.theta_max_violation.max(v);
            let w = if sup_env > T::zero() {
                series.sup_diff[k] / sup_env - T::one()
            } else {
                T::zero()
            };
            report.sup_max_violation = report.sup_max_violation.max(w);
        }
        if field_in_box(&pair.u[k], dl, du) && field_in_box(&pair.v[k], dl, du) {
            let sum_th: T = series.components[k].iter().copied().sum();
            let th = series.theta[k];
            let sd = series.sup_diff[k];
            let scale = T::one().max(th);
            let ok = amin * sum_th <= th + tiny * scale
                && th <= amax * sum_th + tiny * scale
                && amin / du * sd <= th + tiny * scale
                && th <= amax / dl * sd + tiny * scale;
            if !ok {
                report.sandwich_violations += 1;
            }
        }
    }
    report.theta_pass = report.theta_max_violation <= options.tol_rel;
    report.sup_pass = report.sup_max_violation <= options.tol_rel;
    report.pass = report.theta_pass && report.sup_pass;
    if !report.degenerate {
        let mid = entry + (end - entry) / 2;
        report.measured_rate = fitted_decay_rate(
            &series.times[mid..=end],
            &series.theta[mid..=end],
            theta0 * T::lit(1e-12),
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ProbeSpec<T> {
    /// Start time of the perturbation; snapped to the nearest base snapshot.
    pub t2: T,
    /// Bound on the per-node relative perturbation, in `[0, 1)`.
    pub radius: T,
    pub eps_target: T,
    pub horizon: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProbeReport<T> {
    pub t2: T,
    pub radius: T,
    pub eps_target: T,
    pub initial_diff: T,
    /// `(t, sum_i sup_x |u_i - v_i|)` at every recorded time.
    pub trace: Vec<(T, T)>,
    pub max_diff: T,
    /// The difference stayed below `eps_target` throughout.
    pub stayed_below: bool,
    /// First recorded time with difference below `eps_target`.
    pub settle_time: Option<T>,
}

impl<T: Scalar> ProbeReport<T> {
    /// First recorded time at which the difference is at most `level`.
    pub fn time_below(&self, level: T) -> Option<T> {
        self.trace.iter().find(|(_, d)| *d <= level).map(|&(t, _)| t)
    }
}

/// Perturbs the base solution at `t2` by a seeded relative factor in
/// `[1 - r, 1 + r]` per node and follows both solutions for `horizon`.
pub fn stability_probe<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    base: &Trajectory<T>,
    probe: &ProbeSpec<T>,
    controls: &SolveControls<T>,
    seed: u64,
) -> Result<ProbeReport<T>> {
    if !(probe.radius >= T::zero()) || probe.radius >= T::one() {
        return Err(Error::invalid(format!(
            "perturbation radius must lie in [0, 1) to keep the field positive, got {}",
            probe.radius
        )));
    }
    if !(probe.horizon > T::zero()) || !(probe.eps_target > T::zero()) {
        return Err(Error::invalid("probe horizon and eps_target must be positive"));
    }
    let (first, last) = match (base.times.first(), base.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::invalid("base trajectory is empty")),
    };
    if probe.t2 < first || probe.t2 > last {
        return Err(Error::invalid(format!(
            "t2 = {} lies outside the base span [{first}, {last}]",
            probe.t2
        )));
    }
    let k = base
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (*a.1 - probe.t2)
                .abs()
                .partial_cmp(&(*b.1 - probe.t2).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(k, _)| k)
        .unwrap();
    let t2 = base.times[k];
    let u = &base.snapshots[k];
    if !u.all_positive() {
        return Err(Error::invalid("base snapshot is not positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = u.clone();
    for x in v.values_mut() {
        let xi: f64 = rng.gen_range(-1.0..=1.0);
        *x = *x * (T::one() + probe.radius * T::lit(xi));
    }
    if !v.all_positive() {
        return Err(Error::invalid("perturbed field is not positive"));
    }
    let mut c = controls.clone();
    c.t_end = probe.horizon;
    let pair = simulate_pair_from(spec, grid, u, &v, t2, &c)?;
    if let Some(err) = pair.failure.clone() {
        return Err(err);
    }
    let trace: Vec<(T, T)> = pair
        .times
        .iter()
        .zip(pair.u.iter().zip(&pair.v))
        .map(|(&t, (a, b))| sup_difference(a, b).map(|d| (t, d)))
        .collect::<Result<_>>()?;
    let max_diff = trace.iter().fold(T::zero(), |a, p| a.max(p.1));
    Ok(ProbeReport {
        t2,
        radius: probe.radius,
        eps_target: probe.eps_target,
        initial_diff: trace[0].1,
        stayed_below: max_diff < probe.eps_target,
        settle_time: trace.iter().find(|p| p.1 < probe.eps_target).map(|p| p.0),
        max_diff,
        trace,
    })
}

/// Writes `t, theta, theta_i..., sup_diff, envelope, sup_envelope, residual_i...`
/// rows; envelope and residual columns are empty outside the checked window.
pub fn write_series_csv<T: Scalar, W: Write>(
    series: &ThetaSeries<T>,
    envelope: Option<&EnvelopeReport<T>>,
    inequality: Option<&InequalityReport<T>>,
    mut out: W,
) -> io::Result<()> {
    let n = series.alpha.len();
    let mut header = vec!["t".to_string(), "theta".to_string()];
    header.extend((1..=n).map(|i| format!("theta_{i}")));
    header.extend(["sup_diff", "envelope", "sup_envelope"].map(String::from));
    header.extend((1..=n).map(|i| format!("residual_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..series.times.len() {
        let mut row = vec![fmt_sci(series.times[k]), fmt_sci(series.theta[k])];
        row.extend(series.components[k].iter().map(|&v| fmt_sci(v)));
        row.push(fmt_sci(series.sup_diff[k]));
        let env = envelope.and_then(|e| {
            (k >= e.entry_index && k <= e.end_index)
                .then(|| (e.theta_envelope[k - e.entry_index], e.sup_envelope[k - e.entry_index]))
        });
        match env {
            Some((a, b)) => row.extend([fmt_sci(a), fmt_sci(b)]),
            None => row.extend([String::new(), String::new()]),
        }
        let res = inequality
            .filter(|r| k >= r.entry_index)
            .and_then(|r| r.residuals.get(k - r.entry_index));
        match res {
            Some(r) => row.extend(r.iter().map(|&v| fmt_sci(v))),
            None => row.extend(std::iter::repeat(String::new()).take(n)),
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
