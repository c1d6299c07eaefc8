//! Closed-form nonautonomous Lotka–Volterra competition family.
//!
//! `f_i(t,x,u) = a_i(t,x) - sum_j b_ij(t) u_j` with
//! `a_i(t,x) = a0_i + a_amp_i sin(a_freq_i t + a_phase_i) + a_space_i s(x)` and
//! `b_ij(t) = b0_ij + b_amp_ij cos(b_freq_ij t + b_phase_ij)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smooth spatial profile `s(x)` multiplying the space-dependent part of `a_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum SpatialProfile<T> {
    /// `s(x) = 1`.
    #[default]
    Constant,
    /// `s(x) = prod_k cos(pi x_k / L_k)`; satisfies the no-flux condition.
    Cosine,
    /// `s(x) = exp(-|x - center|^2 / (2 width^2))`.
    Gaussian { center: Vec<T>, width: T },
}

impl<T: Scalar> SpatialProfile<T> {
    pub fn eval(&self, x: &[T], extents: &[T]) -> T {
        match self {
            SpatialProfile::Constant => T::one(),
            SpatialProfile::Cosine => x
                .iter()
                .zip(extents)
                .map(|(&xk, &lk)| (T::PI() * xk / lk).cos())
                .fold(T::one(), |acc, c| acc * c),
            SpatialProfile::Gaussian { center, width } => {
                let r2: T = x.iter().zip(center).map(|(&a, &c)| (a - c) * (a - c)).sum();
                (-r2 / (T::lit(2.0) * *width * *width)).exp()
            }
        }
    }

    /// Exact `(min, max)` of the profile over the closed box `[0, L]`.
    pub fn range(&self, extents: &[T]) -> (T, T) {
        match self {
            SpatialProfile::Constant => (T::one(), T::one()),
            // every factor sweeps [-1, 1]; the product does too
            SpatialProfile::Cosine => (-T::one(), T::one()),
            SpatialProfile::Gaussian { center, width } => {
                let mut near = T::zero();
                let mut far = T::zero();
                for (&c, &l) in center.iter().zip(extents) {
                    let clamped = c.max(T::zero()).min(l);
                    near = near + (c - clamped) * (c - clamped);
                    let d = c.abs().max((c - l).abs());
                    far = far + d * d;
                }
                let denom = T::lit(2.0) * *width * *width;
                ((-far / denom).exp(), (-near / denom).exp())
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let SpatialProfile::Gaussian { center, width } = self {
            if center.len() != dim {
                return Err(Error::invalid(format!(
                    "gaussian profile center has {} coordinates, domain has {dim}",
                    center.len()
                )));
            }
            if !(*width > T::zero()) {
                return Err(Error::invalid("gaussian profile width must be positive"));
            }
        }
        Ok(())
    }
}

/// Parameters of the Lotka–Volterra family. Omitted oscillation and spatial
/// terms default to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct LotkaVolterra<T> {
    pub a0: Vec<T>,
    #[serde(default)]
    pub a_amp: Vec<T>,
    #[serde(default)]
    pub a_freq: Vec<T>,
    #[serde(default)]
    pub a_phase: Vec<T>,
    #[serde(default)]
    pub a_space: Vec<T>,
    #[serde(default)]
    pub profile: SpatialProfile<T>,
    pub b0: Vec<Vec<T>>,
    #[serde(default)]
    pub b_amp: Vec<Vec<T>>,
    #[serde(default)]
    pub b_freq: Vec<Vec<T>>,
    #[serde(default)]
    pub b_phase: Vec<Vec<T>>,
}

/// Sup and inf over `t >= 0` of `amp * wave(freq * t + phase)`, where `wave`
/// is sin or cos. A zero frequency freezes the wave at its phase.
fn oscillation_range<T: Scalar>(amp: T, freq: T, frozen: T) -> (T, T) {
    if freq == T::zero() {
        let v = amp * frozen;
        (v, v)
    } else {
        (-amp.abs(), amp.abs())
    }
}

impl<T: Scalar> LotkaVolterra<T> {
    /// Constant coefficients `a`, `b`.
    pub fn constant(a: Vec<T>, b: Vec<Vec<T>>) -> Self {
        LotkaVolterra {
            a0: a,
            a_amp: vec![],
            a_freq: vec![],
            a_phase: vec![],
            a_space: vec![],
            profile: SpatialProfile::Constant,
            b0: b,
            b_amp: vec![],
            b_freq: vec![],
            b_phase: vec![],
        }
    }

    pub fn n_species(&self) -> usize {
        self.a0.len()
    }

    /// Fills omitted terms with zeros and checks shapes and the structural
    /// sign constraints.
    pub(crate) fn normalized(mut self, dim: usize) -> Result<Self> {
        let n = self.a0.len();
        if n == 0 {
            return Err(Error::invalid("at least one species is required"));
        }
        for (name, v) in [
            ("a_amp", &mut self.a_amp),
            ("a_freq", &mut self.a_freq),
            ("a_phase", &mut self.a_phase),
            ("a_space", &mut self.a_space),
        ] {
            if v.is_empty() {
                *v = vec![T::zero(); n];
            } else if v.len() != n {
                return Err(Error::invalid(format!("{name} has {} entries, expected {n}", v.len())));
            }
        }
        if self.b0.len() != n || self.b0.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("b0 must be {n}x{n}")));
        }
        for (name, m) in [
            ("b_amp", &mut self.b_amp),
            ("b_freq", &mut self.b_freq),
            ("b_phase", &mut self.b_phase),
        ] {
            if m.is_empty() {
                *m = vec![vec![T::zero(); n]; n];
            } else if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(Error::invalid(format!("{name} must be {n}x{n}")));
            }
        }
        self.profile.validate(dim)?;
        let all_finite = self
            .a0
            .iter()
            .chain(&self.a_amp)
            .chain(&self.a_freq)
            .chain(&self.a_phase)
            .chain(&self.a_space)
            .chain(self.b0.iter().flatten())
            .chain(self.b_amp.iter().flatten())
            .chain(self.b_freq.iter().flatten())
            .chain(self.b_phase.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("Lotka-Volterra parameters must be finite"));
        }
        for i in 0..n {
            for j in 0..n {
                let (lo, _) = self.interaction_range(i, j);
                if i == j && !(lo > T::zero()) {
                    return Err(Error::AssumptionViolation {
                        assumption: "A3",
                        detail: format!("self-limitation b_{i}{i} has infimum {lo}, must be positive"),
                    });
                }
                if i != j && lo < T::zero() {
                    return Err(Error::AssumptionViolation {
                        assumption: "competitive",
                        detail: format!("interaction b_{i}{j} has infimum {lo}, must be nonnegative"),
                    });
                }
            }
        }
        Ok(self)
    }

    pub fn intrinsic_rate(&self, i: usize, t: T, x: &[T], extents: &[T]) -> T {
        let osc = self.a_amp[i] * (self.a_freq[i] * t + self.a_phase[i]).sin();
        let space = if self.a_space[i] == T::zero() {
            T::zero()
        } else {
            self.a_space[i] * self.profile.eval(x, extents)
        };
        self.a0[i] + osc + space
    }

    pub fn interaction(&self, i: usize, j: usize, t: T) -> T {
        let amp = self.b_amp[i][j];
        if amp == T::zero() {
            self.b0[i][j]
        } else {
            self.b0[i][j] + amp * (self.b_freq[i][j] * t + self.b_phase[i][j]).cos()
        }
    }

    /// Exact `(inf, sup)` of `b_ij(t)` over `t >= 0`.
    pub fn interaction_range(&self, i: usize, j: usize) -> (T, T) {
        let (lo, hi) = oscillation_range(self.b_amp[i][j], self.b_freq[i][j], self.b_phase[i][j].cos());
        (self.b0[i][j] + lo, self.b0[i][j] + hi)
    }

    /// Exact `(inf, sup)` of `a_i(t, x)` over `t >= 0` and the closed box.
    pub fn intrinsic_range(&self, i: usize, extents: &[T]) -> (T, T) {
        let (lo_t, hi_t) = oscillation_range(self.a_amp[i], self.a_freq[i], self.a_phase[i].sin());
        let (smin, smax) = self.profile.range(extents);
        let c = self.a_space[i];
        let (lo_x, hi_x) = if c >= T::zero() {
            (c * smin, c * smax)
        } else {
            (c * smax, c * smin)
        };
        (self.a0[i] + lo_t + lo_x, self.a0[i] + hi_t + hi_x)
    }

    /// Spatial `(min, max)` of the space-dependent part `a_space_i s(x)`.
    pub(crate) fn spatial_term_range(&self, i: usize, extents: &[T]) -> (T, T) {
        let (smin, smax) = self.profile.range(extents);
        let c = self.a_space[i];
        if c >= T::zero() {
            (c * smin, c * smax)
        } else {
            (c * smax, c * smin)
        }
    }

    /// Time average of the oscillating part of `a_i` over one period (zero
    /// unless the frequency is zero).
    pub(crate) fn oscillation_mean(&self, i: usize) -> T {
        if self.a_freq[i] == T::zero() {
            self.a_amp[i] * self.a_phase[i].sin()
        } else {
            T::zero()
        }
    }

    /// Amplitude and angular frequency of the oscillating part of `a_i`.
    pub(crate) fn oscillation(&self, i: usize) -> (T, T) {
        (self.a_amp[i], self.a_freq[i])
    }
}
