//! Time integration of `du_i/dt = Δu_i + f_i(t,x,u) u_i` on a grid.
//!
//! Each step is a Strang splitting: a backward-Euler diffusion half-step, a
//! full reaction step, and another diffusion half-step. The reaction is
//! integrated node by node with classical RK4 on `w_i = ln u_i`, so the
//! densities stay positive for any step size; the diffusion matrix is an
//! M-matrix, so its inverse is nonnegative.

mod banded;
mod exponential;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridDescriptor};
use crate::lyapunov::PairTrajectory;
use crate::model::SystemSpec;
use crate::scalar::Scalar;

use banded::BandedLu;
use exponential::CosineExponential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    #[default]
    Strang,
}

/// Propagator used for the diffusion half-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionScheme {
    /// `(I - dt/2 L_h)^{-1}`: an M-matrix inverse, first order in time.
    #[default]
    BackwardEuler,
    /// `exp(dt/2 L_h)` through the cosine eigenbasis of the box: exact in
    /// time, nonnegative, and second order overall under Strang splitting.
    CosineExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct SolveControls<T> {
    pub dt: T,
    pub t_end: T,
    /// Steps between stored snapshots.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_floor")]
    pub positivity_floor: T,
    #[serde(default)]
    pub splitting: Splitting,
    #[serde(default)]
    pub diffusion: DiffusionScheme,
}

fn default_record_every() -> usize {
    1
}

fn default_floor<T: Scalar>() -> T {
    T::lit(1e-300).max(T::min_positive_value())
}

impl<T: Scalar> SolveControls<T> {
    pub fn new(dt: T, t_end: T, record_every: usize) -> Self {
        SolveControls {
            dt,
            t_end,
            record_every,
            positivity_floor: default_floor(),
            splitting: Splitting::Strang,
            diffusion: DiffusionScheme::BackwardEuler,
        }
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionScheme) -> Self {
        self.diffusion = diffusion;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the final time lands within `dt` of `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - T::lit(1e-9))
            .ceil()
            .to_usize()
            .unwrap_or(0)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverMeta<T> {
    pub dt: T,
    pub steps: usize,
    pub rejected_steps: usize,
}

/// Snapshots of one positive solution.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub grid: GridDescriptor<T>,
    pub times: Vec<T>,
    pub snapshots: Vec<Field<T>>,
    pub meta: SolverMeta<T>,
    /// Set when integration aborted; snapshots up to the failure are kept.
    pub failure: Option<Error>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn last(&self) -> Option<(T, &Field<T>)> {
        self.times.last().copied().zip(self.snapshots.last())
    }
}

/// Reusable integrator for one system, grid and step size.
pub struct Stepper<'a, T> {
    spec: &'a SystemSpec<T>,
    grid: &'a Grid<T>,
    dt: T,
    floor: T,
    diffusion: Diffusion<T>,
    scratch: Scratch<T>,
}

enum Diffusion<T> {
    Implicit(BandedLu<T>),
    Exponential(CosineExponential<T>),
}

struct Scratch<T> {
    u: Vec<T>,
    w: Vec<T>,
    k: [Vec<T>; 4],
    stage: Vec<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub fn new(
        spec: &'a SystemSpec<T>,
        grid: &'a Grid<T>,
        dt: T,
        positivity_floor: T,
        scheme: DiffusionScheme,
    ) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        check_grid(spec, grid)?;
        let n = spec.n_species();
        Ok(Stepper {
            spec,
            grid,
            dt,
            floor: positivity_floor,
            diffusion: match scheme {
                DiffusionScheme::BackwardEuler => Diffusion::Implicit(BandedLu::diffusion(grid, dt * T::lit(0.5))?),
                DiffusionScheme::CosineExponential => {
                    Diffusion::Exponential(CosineExponential::new(grid, dt * T::lit(0.5)))
                }
            },
            scratch: Scratch {
                u: vec![T::zero(); n],
                w: vec![T::zero(); n],
                k: [
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                ],
                stage: vec![T::zero(); n],
            },
        })
    }

    fn diffuse_half(&mut self, state: &mut Field<T>) {
        for s in 0..state.n_species() {
            match &mut self.diffusion {
                Diffusion::Implicit(lu) => lu.solve_in_place(state.species_mut(s)),
                Diffusion::Exponential(e) => e.apply_in_place(state.species_mut(s)),
            }
        }
    }

    /// RK4 on `w = ln u` at every node over `[t, t + dt]`. Substeps keep
    /// `h |f| <= 1/2` so that very large steps stay stable.
    fn react(&mut self, state: &mut Field<T>, t: T) {
        let n = self.spec.n_species();
        let dt = self.dt;
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let two = T::lit(2.0);
        let nodes = self.grid.node_count();
        let spec = self.spec;
        let Scratch { u, w, k, stage } = &mut self.scratch;
        for m in 0..nodes {
            let x = self.grid.point(m);
            state.node_values(m, u);
            for i in 0..n {
                w[i] = u[i].ln();
            }
            let mut tau = T::zero();
            while tau < dt {
                let mut h = dt - tau;
                for s in 0..4 {
                    let c = [T::zero(), half, half, T::one()][s];
                    for i in 0..n {
                        let shift = if s == 0 { T::zero() } else { c * h * k[s - 1][i] };
                        stage[i] = (w[i] + shift).exp();
                    }
                    spec.rates_into(t + tau + c * h, x, stage, &mut k[s]);
                    if s == 0 {
                        let fmax = k[0].iter().fold(T::zero(), |a, v| a.max(v.abs()));
                        if fmax * h > half {
                            h = half / fmax;
                        }
                    }
                }
                for i in 0..n {
                    w[i] = w[i] + (k[0][i] + two * k[1][i] + two * k[2][i] + k[3][i]) * sixth * h;
                }
                tau = if dt - (tau + h) <= dt * T::epsilon() {
                    dt
                } else {
                    tau + h
                };
            }
            let values = state.values_mut();
            for i in 0..n {
                values[i * nodes + m] = w[i].exp();
            }
        }
    }

    fn check_positive(&self, state: &Field<T>, t: T) -> Result<()> {
        let nodes = state.node_count();
        for (idx, &v) in state.values().iter().enumerate() {
            if !(v > self.floor) || !v.is_finite() {
                return Err(Error::Positivity {
                    species: idx / nodes,
                    node: idx % nodes,
                    time: t.to_f64_lossy(),
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Advances `state` from `t` to `t + dt` in place.
    pub fn advance(&mut self, state: &mut Field<T>, t: T) -> Result<()> {
        self.diffuse_half(state);
        self.react(state, t);
        self.diffuse_half(state);
        self.check_positive(state, t + self.dt)
    }
}

fn check_grid<T: Scalar>(spec: &SystemSpec<T>, grid: &Grid<T>) -> Result<()> {
    let tol = T::lit(1e-12);
    let same = grid.dim() == spec.domain().len()
        && grid
            .extents()
            .iter()
            .zip(spec.domain())
            .all(|(&a, &b)| (a - b).abs() <= tol * b);
    if !same {
        return Err(Error::invalid(format!(
            "grid extents {:?} do not match the system domain {:?}",
            grid.extents(),
            spec.domain()
        )));
    }
    Ok(())
}

fn check_state<T: Scalar>(spec: &SystemSpec<T>, grid: &Grid<T>, state: &Field<T>, what: &str) -> Result<()> {
    if state.shape() != grid.nodes_per_axis() || state.n_species() != spec.n_species() {
        return Err(Error::invalid(format!(
            "{what} does not match the grid or species count"
        )));
    }
    if !state.all_positive() || state.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} must be strictly positive and finite")));
    }
    Ok(())
}

/// One Strang step from `t` to `t + dt`.
pub fn step<T: Scalar>(spec: &SystemSpec<T>, grid: &Grid<T>, state: &Field<T>, t: T, dt: T) -> Result<Field<T>> {
    check_state(spec, grid, state, "state")?;
    let mut stepper = Stepper::new(spec, grid, dt, default_floor(), DiffusionScheme::BackwardEuler)?;
    let mut next = state.clone();
    stepper.advance(&mut next, t)?;
    Ok(next)
}

/// Integrates from `t = 0`.
pub fn simulate<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    u0: &Field<T>,
    controls: &SolveControls<T>,
) -> Result<Trajectory<T>> {
    simulate_from(spec, grid, u0, T::zero(), controls)
}

/// Integrates from `t_start` to `t_start + controls.t_end`. Step failures end
/// the run early and are recorded in [`Trajectory::failure`].
pub fn simulate_from<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    u0: &Field<T>,
    t_start: T,
    controls: &SolveControls<T>,
) -> Result<Trajectory<T>> {
    controls.validate()?;
    check_state(spec, grid, u0, "initial field")?;
    let mut stepper = Stepper::new(spec, grid, controls.dt, controls.positivity_floor, controls.diffusion)?;
    let steps = controls.steps();
    let mut traj = Trajectory {
        grid: grid.descriptor(),
        times: vec![t_start],
        snapshots: vec![u0.clone()],
        meta: SolverMeta {
            dt: controls.dt,
            steps: 0,
            rejected_steps: 0,
        },
        failure: None,
    };
    let mut state = u0.clone();
    for k in 0..steps {
        let t = t_start + T::from_count(k) * controls.dt;
        if let Err(e) = stepper.advance(&mut state, t) {
            traj.meta.rejected_steps += 1;
            traj.failure = Some(e);
            break;
        }
        traj.meta.steps += 1;
        if (k + 1) % controls.record_every == 0 || k + 1 == steps {
            traj.times.push(t_start + T::from_count(k + 1) * controls.dt);
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}

/// Integrates two solutions with identical steps and snapshot times.
pub fn simulate_pair<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    u0: &Field<T>,
    v0: &Field<T>,
    controls: &SolveControls<T>,
) -> Result<PairTrajectory<T>> {
    simulate_pair_from(spec, grid, u0, v0, T::zero(), controls)
}

pub fn simulate_pair_from<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    u0: &Field<T>,
    v0: &Field<T>,
    t_start: T,
    controls: &SolveControls<T>,
) -> Result<PairTrajectory<T>> {
    if !u0.same_layout(v0) {
        return Err(Error::invalid("the two initial fields live on different grids"));
    }
    let u = simulate_from(spec, grid, u0, t_start, controls)?;
    let v = simulate_from(spec, grid, v0, t_start, controls)?;
    let k = u.times.len().min(v.times.len());
    let failure = u.failure.clone().or_else(|| v.failure.clone());
    Ok(PairTrajectory {
        grid: u.grid,
        times: u.times[..k].to_vec(),
        u: u.snapshots.into_iter().take(k).collect(),
        v: v.snapshots.into_iter().take(k).collect(),
        meta: SolverMeta {
            dt: controls.dt,
            steps: u.meta.steps.min(v.meta.steps),
            rejected_steps: u.meta.rejected_steps + v.meta.rejected_steps,
        },
        failure,
    })
}
