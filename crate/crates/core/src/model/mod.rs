//! The competitive Kolmogorov system `du_i/dt = Δu_i + f_i(t,x,u) u_i`:
//! growth-rate evaluation, coefficient bounds and assumption checks.

mod assumptions;
mod bounds;
mod lotka_volterra;

use std::fmt;
use std::sync::Arc;

pub use assumptions::{validate_assumptions, AssumptionCheck, AssumptionReport, Witness};
pub use bounds::{coefficient_bounds, BoundsReport, SamplingMeta, SamplingPolicy};
pub use lotka_volterra::{LotkaVolterra, SpatialProfile};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(t, x, u, out)`: writes `N` rates, or an `N x N` row-major Jacobian.
pub type RateFn<T> = Arc<dyn Fn(T, &[T], &[T], &mut [T]) + Send + Sync>;

/// Growth rates supplied as opaque evaluators.
#[derive(Clone)]
pub struct SampledSystem<T> {
    n_species: usize,
    rates: RateFn<T>,
    jacobian: RateFn<T>,
    /// Declared period in time; zero means aperiodic.
    period: T,
}

impl<T: Scalar> SampledSystem<T> {
    pub fn new(n_species: usize, rates: RateFn<T>, jacobian: RateFn<T>, period: T) -> Result<Self> {
        if n_species == 0 {
            return Err(Error::invalid("at least one species is required"));
        }
        if !(period >= T::zero()) || !period.is_finite() {
            return Err(Error::invalid("declared period must be finite and nonnegative"));
        }
        Ok(SampledSystem {
            n_species,
            rates,
            jacobian,
            period,
        })
    }

    pub fn period(&self) -> T {
        self.period
    }
}

impl<T> fmt::Debug for SampledSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledSystem")
            .field("n_species", &self.n_species)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    LotkaVolterra,
    SampledCallback,
}

#[derive(Debug, Clone)]
pub enum SystemKind<T> {
    LotkaVolterra(LotkaVolterra<T>),
    Sampled(SampledSystem<T>),
}

/// An `N`-species competitive system on the box `[0, L_0] x ...`.
#[derive(Debug, Clone)]
pub struct SystemSpec<T> {
    domain: Vec<T>,
    kind: SystemKind<T>,
}

impl<T: Scalar> SystemSpec<T> {
    pub fn lotka_volterra(domain: Vec<T>, params: LotkaVolterra<T>) -> Result<Self> {
        check_domain(&domain)?;
        let params = params.normalized(domain.len())?;
        Ok(SystemSpec {
            domain,
            kind: SystemKind::LotkaVolterra(params),
        })
    }

    pub fn sampled(domain: Vec<T>, system: SampledSystem<T>) -> Result<Self> {
        check_domain(&domain)?;
        Ok(SystemSpec {
            domain,
            kind: SystemKind::Sampled(system),
        })
    }

    /// Wraps this system's evaluators as opaque callbacks with the given
    /// declared period.
    pub fn as_sampled(&self, period: T) -> Result<Self> {
        let me = Arc::new(self.clone());
        let rates_src = Arc::clone(&me);
        let jac_src = me;
        let rates: RateFn<T> = Arc::new(move |t, x, u, out| rates_src.rates_into(t, x, u, out));
        let jacobian: RateFn<T> = Arc::new(move |t, x, u, out| jac_src.jacobian_into(t, x, u, out));
        Self::sampled(
            self.domain.clone(),
            SampledSystem::new(self.n_species(), rates, jacobian, period)?,
        )
    }

    pub fn n_species(&self) -> usize {
        match &self.kind {
            SystemKind::LotkaVolterra(lv) => lv.n_species(),
            SystemKind::Sampled(s) => s.n_species,
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            SystemKind::LotkaVolterra(_) => Family::LotkaVolterra,
            SystemKind::Sampled(_) => Family::SampledCallback,
        }
    }

    pub fn kind(&self) -> &SystemKind<T> {
        &self.kind
    }

    pub fn lv_params(&self) -> Option<&LotkaVolterra<T>> {
        match &self.kind {
            SystemKind::LotkaVolterra(lv) => Some(lv),
            SystemKind::Sampled(_) => None,
        }
    }

    /// Extents of the spatial box.
    pub fn domain(&self) -> &[T] {
        &self.domain
    }

    /// Growth rates without argument checks.
    pub fn rates_into(&self, t: T, x: &[T], u: &[T], out: &mut [T]) {
        match &self.kind {
            SystemKind::LotkaVolterra(lv) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut f = lv.intrinsic_rate(i, t, x, &self.domain);
                    for (j, &uj) in u.iter().enumerate() {
                        f = f - lv.interaction(i, j, t) * uj;
                    }
                    *o = f;
                }
            }
            SystemKind::Sampled(s) => (s.rates)(t, x, u, out),
        }
    }

    /// Row-major `N x N` Jacobian `d f_i / d u_j` without argument checks.
    pub fn jacobian_into(&self, t: T, x: &[T], u: &[T], out: &mut [T]) {
        match &self.kind {
            SystemKind::LotkaVolterra(lv) => {
                let n = lv.n_species();
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = -lv.interaction(i, j, t);
                    }
                }
            }
            SystemKind::Sampled(s) => (s.jacobian)(t, x, u, out),
        }
    }

    fn check_args(&self, t: T, x: &[T], u: &[T]) -> Result<()> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
        }
        if x.len() != self.domain.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, domain has {}",
                x.len(),
                self.domain.len()
            )));
        }
        for (k, (&xk, &lk)) in x.iter().zip(&self.domain).enumerate() {
            let slack = lk * T::lit(1e-12);
            if !(xk >= -slack && xk <= lk + slack) {
                return Err(Error::invalid(format!("coordinate {k} = {xk} outside [0, {lk}]")));
            }
        }
        if u.len() != self.n_species() {
            return Err(Error::invalid(format!(
                "density vector has {} entries, expected {}",
                u.len(),
                self.n_species()
            )));
        }
        if let Some((i, v)) = u.iter().enumerate().find(|(_, &v)| !(v >= T::zero())) {
            return Err(Error::invalid(format!("density u_{i} = {v} must be nonnegative")));
        }
        Ok(())
    }
}

fn check_domain<T: Scalar>(domain: &[T]) -> Result<()> {
    if !(1..=2).contains(&domain.len()) {
        return Err(Error::invalid("domain must be an interval or a rectangle"));
    }
    if domain.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
        return Err(Error::invalid("domain extents must be positive and finite"));
    }
    Ok(())
}

/// `(f_1, ..., f_N)` at `(t, x, u)`.
pub fn eval_growth<T: Scalar>(spec: &SystemSpec<T>, t: T, x: &[T], u: &[T]) -> Result<Vec<T>> {
    spec.check_args(t, x, u)?;
    let mut out = vec![T::zero(); spec.n_species()];
    spec.rates_into(t, x, u, &mut out);
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Model(format!("f_{i} is not finite at t = {t}")));
    }
    Ok(out)
}

/// The Jacobian `J_ij = d f_i / d u_j` at `(t, x, u)`.
pub fn eval_growth_jacobian<T: Scalar>(spec: &SystemSpec<T>, t: T, x: &[T], u: &[T]) -> Result<Vec<Vec<T>>> {
    spec.check_args(t, x, u)?;
    let n = spec.n_species();
    let mut flat = vec![T::zero(); n * n];
    spec.jacobian_into(t, x, u, &mut flat);
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model(format!("growth-rate Jacobian is not finite at t = {t}")));
    }
    Ok(flat.chunks(n).map(|r| r.to_vec()).collect())
}
