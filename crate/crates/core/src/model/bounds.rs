//! Scalar constants extracted from a system: the self-limitation floor
//! `b_lower`, interaction ceilings `b_upper(eps)` on the dissipativity box
//! `B(eps)`, and the range of the zero-density growth rate.

use serde::{Deserialize, Serialize};

use super::{SystemKind, SystemSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridDescriptor};
use crate::scalar::Scalar;

/// How sampled systems are probed. Closed-form families ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SamplingPolicy<T> {
    /// Time horizon for aperiodic systems.
    pub horizon: T,
    pub dt: T,
    pub nodes_per_axis: usize,
    /// Lattice points per density axis.
    pub u_lattice: usize,
    /// Upper edge of the density box on which the self-limitation floor is probed.
    pub u_probe_max: T,
}

impl<T: Scalar> Default for SamplingPolicy<T> {
    fn default() -> Self {
        SamplingPolicy {
            horizon: T::lit(20.0),
            dt: T::lit(0.05),
            nodes_per_axis: 9,
            u_lattice: 17,
            u_probe_max: T::lit(10.0),
        }
    }
}

impl<T: Scalar> SamplingPolicy<T> {
    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.horizon > T::zero()) {
            return Err(Error::invalid("sampling horizon and dt must be positive"));
        }
        if self.nodes_per_axis < 3 || self.u_lattice < 2 {
            return Err(Error::invalid(
                "sampling needs >= 3 nodes per axis and >= 2 lattice points",
            ));
        }
        if !(self.u_probe_max > T::zero()) {
            return Err(Error::invalid("u_probe_max must be positive"));
        }
        Ok(())
    }

    /// Time samples: one period when the system declares one, else the horizon.
    pub(crate) fn times(&self, period: T) -> Vec<T> {
        let span = if period > T::zero() { period } else { self.horizon };
        let steps = (span / self.dt).ceil().to_usize().unwrap_or(1).max(1);
        (0..=steps)
            .map(|k| span * T::from_count(k) / T::from_count(steps))
            .collect()
    }

    pub(crate) fn grid(&self, domain: &[T]) -> Result<Grid<T>> {
        Grid::new(&GridDescriptor {
            extents: domain.to_vec(),
            nodes: vec![self.nodes_per_axis; domain.len()],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SamplingMeta<T> {
    /// True when every bound is exact (closed form).
    pub exact: bool,
    /// True when the time direction was covered by one declared period.
    pub time_exact: bool,
    pub time_samples: usize,
    pub spatial_nodes: usize,
    pub u_lattice: usize,
    pub dt: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundsReport<T> {
    pub b_lower: Vec<T>,
    /// `b_upper[i][j]` = sup of `-d f_i / d u_j` over `B(epsilon_used)`.
    pub b_upper: Vec<Vec<T>>,
    pub a_upper: Vec<T>,
    pub a_lower: Vec<T>,
    pub epsilon_used: T,
    /// Upper corner of `B(epsilon_used)`: `a_upper_i / b_lower_i + eps`.
    pub box_upper: Vec<T>,
    pub sampling_meta: SamplingMeta<T>,
}

impl<T: Scalar> BoundsReport<T> {
    /// Bounds given directly rather than extracted from a system.
    pub fn from_constants(
        a_lower: Vec<T>,
        a_upper: Vec<T>,
        b_lower: Vec<T>,
        b_upper: Vec<Vec<T>>,
        epsilon: T,
    ) -> Result<Self> {
        let n = b_lower.len();
        if a_lower.len() != n || a_upper.len() != n || b_upper.len() != n || b_upper.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("bound vectors and matrix must share one species count"));
        }
        check_floor(&b_lower)?;
        let box_upper = (0..n).map(|i| a_upper[i] / b_lower[i] + epsilon).collect();
        Ok(BoundsReport {
            b_lower,
            b_upper,
            a_upper,
            a_lower,
            epsilon_used: epsilon,
            box_upper,
            sampling_meta: SamplingMeta {
                exact: true,
                time_exact: true,
                time_samples: 0,
                spatial_nodes: 0,
                u_lattice: 0,
                dt: None,
            },
        })
    }

    pub fn n_species(&self) -> usize {
        self.b_lower.len()
    }
}

/// Lattice on `[0, side_i + eps]` with the fixed spacing `side_i / (n - 1)`, so
/// that the lattice for a larger `eps` contains the one for a smaller `eps`.
fn nested_lattice<T: Scalar>(side: T, eps: T, n: usize) -> Vec<T> {
    let h = side / T::from_count(n - 1);
    let reach = ((side + eps) / h + T::lit(1e-9)).floor().to_usize().unwrap_or(n - 1);
    (0..=reach.max(n - 1))
        .map(|k| side * T::from_count(k) / T::from_count(n - 1))
        .collect()
}

/// Calls `visit` for every point of the Cartesian product of `axes`.
pub(crate) fn for_each_lattice_point<T: Scalar>(
    axes: &[Vec<T>],
    mut visit: impl FnMut(&[T]) -> Result<()>,
) -> Result<()> {
    let mut idx = vec![0usize; axes.len()];
    let mut point: Vec<T> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&point)?;
        let mut k = 0;
        loop {
            if k == axes.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                point[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = axes[k][0];
            k += 1;
        }
    }
}

fn finite_or<T: Scalar>(v: T, what: impl FnOnce() -> String) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Model(what()))
    }
}

/// Extracts the bounds at box enlargement `epsilon`.
///
/// The order matters: the range of `f(., ., 0)` and the self-limitation floor
/// come first because they define the box `B(eps)` on which the interaction
/// ceilings are taken.
pub fn coefficient_bounds<T: Scalar>(
    spec: &SystemSpec<T>,
    epsilon: T,
    sampling: &SamplingPolicy<T>,
) -> Result<BoundsReport<T>> {
    if !(epsilon >= T::zero()) || !epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let n = spec.n_species();
    match spec.kind() {
        SystemKind::LotkaVolterra(lv) => {
            let (a_lower, a_upper): (Vec<T>, Vec<T>) = (0..n).map(|i| lv.intrinsic_range(i, spec.domain())).unzip();
            let b_lower: Vec<T> = (0..n).map(|i| lv.interaction_range(i, i).0).collect();
            let b_upper: Vec<Vec<T>> = (0..n)
                .map(|i| (0..n).map(|j| lv.interaction_range(i, j).1).collect())
                .collect();
            check_floor(&b_lower)?;
            let box_upper = (0..n).map(|i| a_upper[i] / b_lower[i] + epsilon).collect();
            Ok(BoundsReport {
                b_lower,
                b_upper,
                a_upper,
                a_lower,
                epsilon_used: epsilon,
                box_upper,
                sampling_meta: SamplingMeta {
                    exact: true,
                    time_exact: true,
                    time_samples: 0,
                    spatial_nodes: 0,
                    u_lattice: 0,
                    dt: None,
                },
            })
        }
        SystemKind::Sampled(sys) => {
            sampling.validate()?;
            let times = sampling.times(sys.period());
            let grid = sampling.grid(spec.domain())?;
            let zero = vec![T::zero(); n];
            let mut f = vec![T::zero(); n];
            let mut jac = vec![T::zero(); n * n];

            let mut a_upper = vec![T::neg_infinity(); n];
            let mut a_lower = vec![T::infinity(); n];
            for &t in &times {
                for m in 0..grid.node_count() {
                    spec.rates_into(t, grid.point(m), &zero, &mut f);
                    for i in 0..n {
                        let v = finite_or(f[i], || format!("f_{i}(t={t}, u=0) is not finite"))?;
                        a_upper[i] = a_upper[i].max(v);
                        a_lower[i] = a_lower[i].min(v);
                    }
                }
            }

            let probe: Vec<Vec<T>> = (0..n)
                .map(|_| nested_lattice(sampling.u_probe_max, T::zero(), sampling.u_lattice))
                .collect();
            let mut b_lower = vec![T::infinity(); n];
            for &t in &times {
                for m in 0..grid.node_count() {
                    let x = grid.point(m);
                    for_each_lattice_point(&probe, |u| {
                        spec.jacobian_into(t, x, u, &mut jac);
                        for i in 0..n {
                            let v = finite_or(-jac[i * n + i], || format!("df_{i}/du_{i} is not finite at t={t}"))?;
                            b_lower[i] = b_lower[i].min(v);
                        }
                        Ok(())
                    })?;
                }
            }
            check_floor(&b_lower)?;

            let box_upper: Vec<T> = (0..n).map(|i| a_upper[i] / b_lower[i] + epsilon).collect();
            let axes: Vec<Vec<T>> = (0..n)
                .map(|i| nested_lattice(a_upper[i] / b_lower[i], epsilon, sampling.u_lattice))
                .collect();
            let mut b_upper = vec![vec![T::neg_infinity(); n]; n];
            for &t in &times {
                for m in 0..grid.node_count() {
                    let x = grid.point(m);
                    for_each_lattice_point(&axes, |u| {
                        spec.jacobian_into(t, x, u, &mut jac);
                        for i in 0..n {
                            for j in 0..n {
                                let v = finite_or(-jac[i * n + j], || format!("df_{i}/du_{j} is not finite at t={t}"))?;
                                b_upper[i][j] = b_upper[i][j].max(v);
                            }
                        }
                        Ok(())
                    })?;
                }
            }
            // the diagonal ceiling can never sit below the floor
            for i in 0..n {
                b_upper[i][i] = b_upper[i][i].max(b_lower[i]);
            }

            Ok(BoundsReport {
                b_lower,
                b_upper,
                a_upper,
                a_lower,
                epsilon_used: epsilon,
                box_upper,
                sampling_meta: SamplingMeta {
                    exact: false,
                    time_exact: sys.period() > T::zero(),
                    time_samples: times.len(),
                    spatial_nodes: grid.node_count(),
                    u_lattice: sampling.u_lattice,
                    dt: Some(sampling.dt),
                },
            })
        }
    }
}

fn check_floor<T: Scalar>(b_lower: &[T]) -> Result<()> {
    if let Some((i, v)) = b_lower.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(Error::AssumptionViolation {
            assumption: "A3",
            detail: format!("self-limitation floor b_lower[{i}] = {v} is not positive"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LotkaVolterra, SpatialProfile};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn canonical() -> SystemSpec<f64> {
        SystemSpec::lotka_volterra(
            vec![1.0],
            LotkaVolterra::constant(vec![3.0, 2.0], vec![vec![2.0, 0.1], vec![0.1, 2.0]]),
        )
        .unwrap()
    }

    #[test]
    fn constant_coefficients_give_exact_bounds() {
        let spec = canonical();
        for eps in [0.0, 0.1, 3.0] {
            let r = coefficient_bounds(&spec, eps, &SamplingPolicy::default()).unwrap();
            assert_eq!(r.b_lower, vec![2.0, 2.0]);
            assert_eq!(r.b_upper, vec![vec![2.0, 0.1], vec![0.1, 2.0]]);
            assert_eq!(r.a_upper, vec![3.0, 2.0]);
            assert_eq!(r.a_lower, vec![3.0, 2.0]);
            assert_eq!(r.box_upper, vec![1.5 + eps, 1.0 + eps]);
            assert!(r.sampling_meta.exact);
        }
    }

    #[test]
    fn oscillating_rate_bounds() {
        let mut lv = LotkaVolterra::constant(vec![3.0, 2.0], vec![vec![2.0, 0.1], vec![0.1, 2.0]]);
        lv.a_amp = vec![1.0, 0.0];
        lv.a_freq = vec![1.0, 0.0];
        let spec = SystemSpec::lotka_volterra(vec![1.0], lv).unwrap();
        let r = coefficient_bounds(&spec, 0.0, &SamplingPolicy::default()).unwrap();
        assert_eq!(r.a_upper[0], 4.0);
        assert_eq!(r.a_lower[0], 2.0);
    }

    #[test]
    fn sampled_constant_system_matches_closed_form() {
        let spec = canonical();
        let sampled = spec.as_sampled(0.0).unwrap();
        let policy = SamplingPolicy {
            horizon: 5.0,
            dt: 0.1,
            nodes_per_axis: 11,
            u_lattice: 33,
            u_probe_max: 10.0,
        };
        let exact = coefficient_bounds(&spec, 0.05, &policy).unwrap();
        let approx = coefficient_bounds(&sampled, 0.05, &policy).unwrap();
        assert!(!approx.sampling_meta.exact);
        for i in 0..2 {
            assert_abs_diff_eq!(exact.b_lower[i], approx.b_lower[i], epsilon = 1e-9);
            assert_abs_diff_eq!(exact.a_upper[i], approx.a_upper[i], epsilon = 1e-9);
            assert_abs_diff_eq!(exact.a_lower[i], approx.a_lower[i], epsilon = 1e-9);
            for j in 0..2 {
                assert_abs_diff_eq!(exact.b_upper[i][j], approx.b_upper[i][j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn nested_lattice_grows_with_epsilon() {
        let small = nested_lattice(1.5, 0.0, 17);
        assert_eq!(small.len(), 17);
        assert_eq!(*small.last().unwrap(), 1.5);
        let big = nested_lattice(1.5, 0.2, 17);
        assert!(big.len() > small.len());
        assert!(small.iter().all(|v| big.contains(v)));
    }

    #[test]
    fn nonpositive_floor_is_reported_as_a3() {
        let bad: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, u, out| out[0] = 1.0 + u[0]);
        let bad_jac: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, _, out| out[0] = 1.0);
        let spec = SystemSpec::sampled(
            vec![1.0],
            crate::model::SampledSystem::new(1, bad, bad_jac, 0.0).unwrap(),
        )
        .unwrap();
        let err = coefficient_bounds(&spec, 0.0, &SamplingPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation { assumption: "A3", .. }));
    }

    #[test]
    fn non_finite_rates_are_model_errors() {
        let nan: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, _, out| out[0] = f64::NAN);
        let jac: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, _, out| out[0] = -1.0);
        let spec = SystemSpec::sampled(vec![1.0], crate::model::SampledSystem::new(1, nan, jac, 0.0).unwrap()).unwrap();
        assert!(matches!(
            coefficient_bounds(&spec, 0.0, &SamplingPolicy::default()),
            Err(Error::Model(_))
        ));
    }

    fn random_lv() -> impl Strategy<Value = LotkaVolterra<f64>> {
        (
            prop::collection::vec(0.5f64..4.0, 2),
            prop::collection::vec(-1.0f64..1.0, 2),
            prop::collection::vec(0.2f64..3.0, 2),
            prop::collection::vec(-0.5f64..0.5, 2),
            prop::collection::vec(prop::collection::vec(0.0f64..0.5, 2), 2),
            prop::collection::vec(prop::collection::vec(0.0f64..0.3, 2), 2),
        )
            .prop_map(|(a0, amp, freq, space, off, bamp)| {
                let mut lv = LotkaVolterra::constant(a0, vec![vec![2.0, off[0][1]], vec![off[1][0], 1.5]]);
                lv.a_amp = amp;
                lv.a_freq = freq;
                lv.a_space = space;
                lv.profile = SpatialProfile::Cosine;
                lv.b_amp = vec![
                    vec![bamp[0][0], bamp[0][1].min(off[0][1])],
                    vec![bamp[1][0].min(off[1][0]), bamp[1][1]],
                ];
                lv.b_freq = vec![vec![1.0, 2.0], vec![0.5, 3.0]];
                lv
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Sampling the closed-form family never leaves its exact range.
        #[test]
        fn sampled_estimates_stay_inside_closed_form(lv in random_lv(), lattice in 3usize..9) {
            let spec = SystemSpec::lotka_volterra(vec![1.0], lv).unwrap();
            let policy = SamplingPolicy { horizon: 7.0, dt: 0.37, nodes_per_axis: 7, u_lattice: lattice, u_probe_max: 3.0 };
            let exact = coefficient_bounds(&spec, 0.1, &policy).unwrap();
            let approx = coefficient_bounds(&spec.as_sampled(0.0).unwrap(), 0.1, &policy).unwrap();
            for i in 0..2 {
                prop_assert!(approx.a_upper[i] <= exact.a_upper[i] + 1e-12);
                prop_assert!(approx.a_lower[i] >= exact.a_lower[i] - 1e-12);
                prop_assert!(approx.b_lower[i] >= exact.b_lower[i] - 1e-12);
                for j in 0..2 {
                    prop_assert!(approx.b_upper[i][j] <= exact.b_upper[i][j] + 1e-12);
                }
            }
        }

        #[test]
        fn sampled_ceiling_is_monotone_in_epsilon(e1 in 0.0f64..0.5, de in 0.0f64..0.5) {
            let quad: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, u, out| {
                out[0] = 2.0 - u[0] - 0.1 * u[1] * u[1];
                out[1] = 1.0 - 0.2 * u[0] * u[0] - u[1];
            });
            let quad_jac: crate::model::RateFn<f64> = std::sync::Arc::new(|_, _, u, out| {
                out[0] = -1.0;
                out[1] = -0.2 * u[1];
                out[2] = -0.4 * u[0];
                out[3] = -1.0;
            });
            let spec = SystemSpec::sampled(vec![1.0], crate::model::SampledSystem::new(2, quad, quad_jac, 1.0).unwrap()).unwrap();
            let policy = SamplingPolicy { nodes_per_axis: 3, dt: 0.5, ..SamplingPolicy::default() };
            let lo = coefficient_bounds(&spec, e1, &policy).unwrap();
            let hi = coefficient_bounds(&spec, e1 + de, &policy).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!(lo.b_upper[i][j] <= hi.b_upper[i][j]);
                }
                prop_assert!(lo.b_upper[i][i] >= lo.b_lower[i]);
            }
        }
    }
}
