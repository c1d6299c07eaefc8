//! Competitive Kolmogorov reaction-diffusion systems
//! `u_t = Δu + f(t, x, u) u` with Neumann boundary conditions: simulation,
//! attractivity certificates and Lyapunov-functional verification.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common case.

pub mod averages;
pub mod certificate;
pub mod error;
pub mod grid;
pub mod lp;
pub mod lyapunov;
pub mod model;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type SystemSpec64 = model::SystemSpec<f64>;
pub type LotkaVolterra64 = model::LotkaVolterra<f64>;
pub type BoundsReport64 = model::BoundsReport<f64>;
pub type SolveControls64 = solver::SolveControls<f64>;
pub type Trajectory64 = solver::Trajectory<f64>;
pub type PairTrajectory64 = lyapunov::PairTrajectory<f64>;
pub type AverageEstimate64 = averages::AverageEstimate<f64>;
pub type Certificate64 = certificate::Certificate<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::Field<f32>;
pub type SystemSpec32 = model::SystemSpec<f32>;
pub type LotkaVolterra32 = model::LotkaVolterra<f32>;
pub type SolveControls32 = solver::SolveControls<f32>;
pub type Certificate32 = certificate::Certificate<f32>;
