//! Lower and upper time averages `m[f_i]`, `M[f_i]` of the zero-density
//! growth rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{SystemKind, SystemSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMethod {
    ExactPeriodic,
    FiniteHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AverageEstimate<T> {
    pub m: Vec<T>,
    #[serde(rename = "M")]
    pub upper: Vec<T>,
    pub method: AverageMethod,
    pub horizon: T,
    pub min_window: T,
    pub dt: T,
    /// A-priori window truncation bound per species, when one is known.
    pub error_bound: Option<Vec<T>>,
}

impl<T: Scalar> AverageEstimate<T> {
    pub fn n_species(&self) -> usize {
        self.m.len()
    }

    /// Averages of a system whose rates are known to be constant in time.
    pub fn constant(m: Vec<T>, upper: Vec<T>) -> Self {
        AverageEstimate {
            m,
            upper,
            method: AverageMethod::ExactPeriodic,
            horizon: T::zero(),
            min_window: T::zero(),
            dt: T::zero(),
            error_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct AveragePolicy<T> {
    pub horizon: T,
    pub min_window: T,
    pub dt: T,
    /// Spacing of the window-endpoint lattice; `min_window / 10` when unset.
    pub lattice_spacing: Option<T>,
    /// Use the finite-horizon estimator even when a closed form is available.
    pub force_finite_horizon: bool,
}

impl<T: Scalar> Default for AveragePolicy<T> {
    fn default() -> Self {
        AveragePolicy {
            horizon: T::lit(200.0),
            min_window: T::lit(50.0),
            dt: T::lit(0.01),
            lattice_spacing: None,
            force_finite_horizon: false,
        }
    }
}

impl<T: Scalar> AveragePolicy<T> {
    pub fn new(horizon: T, min_window: T, dt: T) -> Self {
        AveragePolicy {
            horizon,
            min_window,
            dt,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min_window > T::zero()) || !(self.horizon > self.min_window) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!(
                "need horizon > min_window > 0, got H = {}, W = {}",
                self.horizon, self.min_window
            )));
        }
        if !(self.dt > T::zero()) || !(self.dt <= self.min_window) {
            return Err(Error::invalid(format!(
                "averaging dt must lie in (0, W], got {}",
                self.dt
            )));
        }
        if let Some(h) = self.lattice_spacing {
            if !(h > T::zero()) || !(h <= self.min_window) {
                return Err(Error::invalid(format!("lattice spacing must lie in (0, W], got {h}")));
            }
        }
        Ok(())
    }
}

/// A scalar function sampled at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
        Ok(TimeSeries { times, values })
    }

    fn span(&self) -> Option<(T, T)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    /// Cumulative trapezoid integrals from the first sample.
    fn prefix(&self) -> Vec<T> {
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.times.len());
        out.push(acc);
        for k in 1..self.times.len() {
            let h = self.times[k] - self.times[k - 1];
            acc = acc + T::lit(0.5) * h * (self.values[k] + self.values[k - 1]);
            out.push(acc);
        }
        out
    }

    /// Integral of the piecewise-linear interpolant from the first sample to `t`.
    fn integral_to(&self, prefix: &[T], t: T) -> T {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return T::zero();
        }
        let k = k - 1;
        if k + 1 == self.times.len() {
            return prefix[k];
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let r = t - t0;
        let vt = v0 + (v1 - v0) * r / (t1 - t0);
        prefix[k] + T::lit(0.5) * r * (v0 + vt)
    }
}

/// Per-species spatial minimum and maximum of `f_i(t, x, 0)` over grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExtremaSeries<T> {
    pub lower: Vec<TimeSeries<T>>,
    pub upper: Vec<TimeSeries<T>>,
}

pub fn spatial_extrema_series<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    times: &[T],
) -> Result<ExtremaSeries<T>> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    if grid.dim() != spec.domain().len() {
        return Err(Error::invalid("grid dimension does not match the domain"));
    }
    let n = spec.n_species();
    let zero = vec![T::zero(); n];
    let mut f = vec![T::zero(); n];
    let mut lower = vec![Vec::with_capacity(times.len()); n];
    let mut upper = vec![Vec::with_capacity(times.len()); n];
    for &t in times {
        let mut lo = vec![T::infinity(); n];
        let mut hi = vec![T::neg_infinity(); n];
        for m in 0..grid.node_count() {
            spec.rates_into(t, grid.point(m), &zero, &mut f);
            for i in 0..n {
                if !f[i].is_finite() {
                    return Err(Error::Model(format!("f_{i}(t = {t}, x, 0) is not finite")));
                }
                lo[i] = lo[i].min(f[i]);
                hi[i] = hi[i].max(f[i]);
            }
        }
        for i in 0..n {
            lower[i].push(lo[i]);
            upper[i].push(hi[i]);
        }
    }
    let wrap = |vals: Vec<Vec<T>>| {
        vals.into_iter()
            .map(|values| TimeSeries {
                times: times.to_vec(),
                values,
            })
            .collect()
    };
    Ok(ExtremaSeries {
        lower: wrap(lower),
        upper: wrap(upper),
    })
}

/// Trapezoid average of `series` over `[s, t]`, interpolating at endpoints
/// that fall between samples.
pub fn window_average<T: Scalar>(series: &TimeSeries<T>, s: T, t: T) -> Result<T> {
    if !(t > s) {
        return Err(Error::invalid(format!("window needs t > s, got s = {s}, t = {t}")));
    }
    let (a, b) = series
        .span()
        .ok_or_else(|| Error::invalid("window average of an empty series"))?;
    if s < a || t > b {
        return Err(Error::invalid(format!(
            "window [{s}, {t}] leaves the series span [{a}, {b}]"
        )));
    }
    let prefix = series.prefix();
    Ok((series.integral_to(&prefix, t) - series.integral_to(&prefix, s)) / (t - s))
}

fn uniform_times<T: Scalar>(end: T, dt: T) -> Vec<T> {
    let steps = (end / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let h = end / T::from_count(steps);
    (0..=steps).map(|k| h * T::from_count(k)).collect()
}

/// Extremes of window averages over all lattice windows of length at least `W`.
fn lattice_extremes<T: Scalar>(series: &TimeSeries<T>, horizon: T, min_window: T, spacing: T, take_max: bool) -> T {
    let prefix = series.prefix();
    let count = (horizon / spacing + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let points: Vec<T> = (0..=count).map(|k| (spacing * T::from_count(k)).min(horizon)).collect();
    let integrals: Vec<T> = points.iter().map(|&p| series.integral_to(&prefix, p)).collect();
    let slack = min_window * T::lit(1e-9);
    let mut best = if take_max { T::neg_infinity() } else { T::infinity() };
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let len = points[b] - points[a];
            if len + slack < min_window {
                continue;
            }
            let avg = (integrals[b] - integrals[a]) / len;
            best = if take_max { best.max(avg) } else { best.min(avg) };
        }
    }
    best
}

/// Estimates `m[f_i]` and `M[f_i]`: in closed form for Lotka–Volterra
/// coefficients, by single-period quadrature for callbacks that declare a
/// period, and by the finite-horizon window lattice otherwise.
pub fn estimate_averages<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    policy: &AveragePolicy<T>,
) -> Result<AverageEstimate<T>> {
    policy.validate()?;
    let n = spec.n_species();
    let (horizon, window, dt) = (policy.horizon, policy.min_window, policy.dt);
    let truncation = spec.lv_params().map(|lv| {
        (0..n)
            .map(|i| {
                let (amp, freq) = lv.oscillation(i);
                if freq == T::zero() {
                    T::zero()
                } else {
                    T::lit(2.0) * amp.abs() / (freq.abs() * window)
                }
            })
            .collect::<Vec<T>>()
    });
    let estimate = |m, upper, method, error_bound| AverageEstimate {
        m,
        upper,
        method,
        horizon,
        min_window: window,
        dt,
        error_bound,
    };

    if !policy.force_finite_horizon {
        match spec.kind() {
            SystemKind::LotkaVolterra(lv) => {
                let (m, upper) = (0..n)
                    .map(|i| {
                        let base = lv.a0[i] + lv.oscillation_mean(i);
                        let (lo, hi) = lv.spatial_term_range(i, spec.domain());
                        (base + lo, base + hi)
                    })
                    .unzip();
                return Ok(estimate(m, upper, AverageMethod::ExactPeriodic, None));
            }
            SystemKind::Sampled(sys) if sys.period() > T::zero() => {
                let series = spatial_extrema_series(spec, grid, &uniform_times(sys.period(), dt))?;
                let period = sys.period();
                let avg = |s: &TimeSeries<T>| *s.prefix().last().unwrap() / period;
                let m = series.lower.iter().map(avg).collect();
                let upper = series.upper.iter().map(avg).collect();
                return Ok(estimate(m, upper, AverageMethod::ExactPeriodic, None));
            }
            SystemKind::Sampled(_) => {}
        }
    }

    let spacing = policy.lattice_spacing.unwrap_or(window / T::lit(10.0));
    let series = spatial_extrema_series(spec, grid, &uniform_times(horizon, dt))?;
    let m: Vec<T> = series
        .lower
        .iter()
        .map(|s| lattice_extremes(s, horizon, window, spacing, false))
        .collect();
    let upper: Vec<T> = series
        .upper
        .iter()
        .map(|s| lattice_extremes(s, horizon, window, spacing, true))
        .collect();
    debug_assert!(m.iter().zip(&upper).all(|(a, b)| a <= b));
    Ok(estimate(m, upper, AverageMethod::FiniteHorizon, truncation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LotkaVolterra, RateFn, SampledSystem, SpatialProfile};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn lv(a_amp: f64, freq: f64) -> SystemSpec<f64> {
        let mut p = LotkaVolterra::constant(vec![3.0, 2.0], vec![vec![2.0, 0.1], vec![0.1, 2.0]]);
        p.a_amp = vec![a_amp, 0.0];
        p.a_freq = vec![freq, 0.0];
        SystemSpec::lotka_volterra(vec![1.0], p).unwrap()
    }

    #[test]
    fn window_average_quadrature() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let linear = TimeSeries::new(times.clone(), times.clone()).unwrap();
        assert!((window_average(&linear, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        // endpoints between samples still integrate the interpolant exactly
        assert!((window_average(&linear, 0.1234, 0.8765).unwrap() - 0.49995).abs() < 1e-12);
        let constant = TimeSeries::new(times.clone(), vec![2.5; times.len()]).unwrap();
        assert!((window_average(&constant, 0.3, 0.7).unwrap() - 2.5).abs() < 1e-12);
        let n = (2.0 * PI / 1e-3).ceil() as usize;
        let ts: Vec<f64> = (0..=n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let sine = TimeSeries::new(ts.clone(), ts.iter().map(|t| t.sin()).collect()).unwrap();
        assert!(window_average(&sine, 0.0, 2.0 * PI).unwrap().abs() < 1e-6);
        assert!(window_average(&sine, 1.0, 1.0).is_err());
        assert!(window_average(&sine, -1.0, 1.0).is_err());
    }

    #[test]
    fn extrema_series() {
        let mut p = LotkaVolterra::constant(vec![3.0], vec![vec![1.0]]);
        p.a_space = vec![1.0];
        p.profile = SpatialProfile::Cosine;
        let spec = SystemSpec::lotka_volterra(vec![1.0], p).unwrap();
        let grid = Grid::interval(1.0, 11).unwrap();
        let s = spatial_extrema_series(&spec, &grid, &[0.0, 1.0]).unwrap();
        assert!(s.lower[0].values.iter().all(|v: &f64| (v - 2.0).abs() < 1e-14));
        assert!(s.upper[0].values.iter().all(|v: &f64| (v - 4.0).abs() < 1e-14));
        let empty = spatial_extrema_series(&spec, &grid, &[]).unwrap();
        assert!(empty.lower[0].values.is_empty());
        let flat = spatial_extrema_series(&lv(1.0, 1.0), &grid, &[0.5]).unwrap();
        assert_eq!(flat.lower[0].values, flat.upper[0].values);
        assert!((flat.lower[0].values[0] - (3.0 + 0.5f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn closed_form_averages() {
        let grid = Grid::interval(1.0, 5).unwrap();
        let policy = AveragePolicy::default();
        let c = estimate_averages(&lv(0.0, 0.0), &grid, &policy).unwrap();
        assert_eq!(c.method, AverageMethod::ExactPeriodic);
        assert_eq!((c.m.clone(), c.upper.clone()), (vec![3.0, 2.0], vec![3.0, 2.0]));
        let s = estimate_averages(&lv(1.0, 1.0), &grid, &policy).unwrap();
        assert_eq!(s.m, vec![3.0, 2.0]);
        assert_eq!(s.upper, vec![3.0, 2.0]);
        // frequency zero freezes the oscillation at amp * sin(phase)
        let mut p = LotkaVolterra::constant(vec![3.0], vec![vec![1.0]]);
        p.a_amp = vec![0.5];
        p.a_phase = vec![PI / 2.0];
        let frozen = SystemSpec::lotka_volterra(vec![1.0], p).unwrap();
        let f = estimate_averages(&frozen, &grid, &policy).unwrap();
        assert!((f.m[0] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn periodic_callback_uses_one_period() {
        let rates: RateFn<f64> = Arc::new(|t, _, u, out| out[0] = 3.0 + t.sin() - u[0]);
        let jac: RateFn<f64> = Arc::new(|_, _, _, out| out[0] = -1.0);
        let spec = SystemSpec::sampled(vec![1.0], SampledSystem::new(1, rates, jac, 2.0 * PI).unwrap()).unwrap();
        let grid = Grid::interval(1.0, 3).unwrap();
        let est = estimate_averages(&spec, &grid, &AveragePolicy::new(200.0, 50.0, 1e-3)).unwrap();
        assert_eq!(est.method, AverageMethod::ExactPeriodic);
        assert!((est.m[0] - 3.0).abs() < 1e-6 && (est.upper[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn finite_horizon_within_truncation_bound() {
        let grid = Grid::interval(1.0, 3).unwrap();
        for w in [25.0, 50.0, 100.0] {
            let mut policy = AveragePolicy::new(4.0 * w, w, 0.01);
            policy.force_finite_horizon = true;
            let est = estimate_averages(&lv(1.0, 1.0), &grid, &policy).unwrap();
            assert_eq!(est.method, AverageMethod::FiniteHorizon);
            let bound = est.error_bound.as_ref().unwrap()[0];
            assert!((bound - 2.0 / w).abs() < 1e-15);
            assert!((est.m[0] - 3.0).abs() <= bound);
            assert!((est.upper[0] - 3.0).abs() <= bound);
            assert!(est.m[0] <= est.upper[0]);
        }
    }

    #[test]
    fn rejects_bad_windows() {
        let grid = Grid::interval(1.0, 3).unwrap();
        assert!(estimate_averages(&lv(1.0, 1.0), &grid, &AveragePolicy::new(50.0, 50.0, 0.1)).is_err());
        assert!(estimate_averages(&lv(1.0, 1.0), &grid, &AveragePolicy::new(100.0, 0.0, 0.1)).is_err());
        assert!(estimate_averages(&lv(1.0, 1.0), &grid, &AveragePolicy::new(100.0, 10.0, 0.0)).is_err());
    }
}
