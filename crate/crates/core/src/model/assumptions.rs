//! Structural checks on a system: bounded zero-density growth (A2),
//! uniform self-limitation (A3), bounded interactions on the dissipativity
//! box (A4) and the competitive sign pattern.

use serde::{Deserialize, Serialize};

use super::bounds::for_each_lattice_point;
use super::{SamplingPolicy, SystemKind, SystemSpec};
use crate::error::Result;
use crate::scalar::Scalar;

/// Magnitude above which a sampled rate or derivative counts as unbounded.
pub const BOUND_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Witness<T> {
    pub t: T,
    pub x: Vec<T>,
    pub u: Vec<T>,
    /// Row (species) index of the offending entry.
    pub i: usize,
    /// Column index for Jacobian entries; `None` for rates.
    pub j: Option<usize>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AssumptionCheck<T> {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub witness: Option<Witness<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AssumptionReport<T> {
    pub exact: bool,
    pub checks: Vec<AssumptionCheck<T>>,
}

impl<T: Scalar> AssumptionReport<T> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck<T>> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst offender of one check.
struct Tally<T> {
    name: &'static str,
    worst: Option<Witness<T>>,
}

impl<T: Scalar> Tally<T> {
    fn new(name: &'static str) -> Self {
        Tally { name, worst: None }
    }

    /// Records a violation whose severity is `value` (larger is worse).
    fn offend(&mut self, t: T, x: &[T], u: &[T], i: usize, j: Option<usize>, value: T) {
        let worse = match &self.worst {
            None => true,
            Some(w) => value > w.value || (value.is_nan() && !w.value.is_nan()),
        };
        if worse {
            self.worst = Some(Witness {
                t,
                x: x.to_vec(),
                u: u.to_vec(),
                i,
                j,
                value,
            });
        }
    }

    fn finish(self, ok_detail: String, bad_detail: &str) -> AssumptionCheck<T> {
        match self.worst {
            None => AssumptionCheck {
                name: self.name.to_string(),
                passed: true,
                detail: ok_detail,
                witness: None,
            },
            Some(w) => AssumptionCheck {
                name: self.name.to_string(),
                passed: false,
                detail: format!("{bad_detail}; worst value {} at t = {}", w.value, w.t),
                witness: Some(w),
            },
        }
    }
}

fn out_of_bounds<T: Scalar>(v: T) -> bool {
    !v.is_finite() || v.abs() > T::lit(BOUND_LIMIT)
}

/// Checks (A2)–(A4) and competitivity, in closed form for the Lotka–Volterra
/// family and by sampling otherwise. Failures are report content, not errors.
pub fn validate_assumptions<T: Scalar>(
    spec: &SystemSpec<T>,
    sampling: &SamplingPolicy<T>,
) -> Result<AssumptionReport<T>> {
    let n = spec.n_species();
    if let SystemKind::LotkaVolterra(lv) = spec.kind() {
        // construction already enforced the sign structure
        let floors: Vec<String> = (0..n).map(|i| format!("{}", lv.interaction_range(i, i).0)).collect();
        let pass = |name: &str, detail: String| AssumptionCheck {
            name: name.to_string(),
            passed: true,
            detail,
            witness: None,
        };
        return Ok(AssumptionReport {
            exact: true,
            checks: vec![
                pass("A2", "intrinsic rates are bounded trigonometric closed forms".into()),
                pass("A3", format!("self-limitation floors [{}]", floors.join(", "))),
                pass("A4", "interaction coefficients are bounded and independent of u".into()),
                pass("competitive", "all interaction infima are nonnegative".into()),
            ],
        });
    }

    let SystemKind::Sampled(sys) = spec.kind() else {
        unreachable!()
    };
    let times = sampling.times(sys.period());
    let grid = sampling.grid(spec.domain())?;
    let zero = vec![T::zero(); n];
    let mut f = vec![T::zero(); n];
    let mut jac = vec![T::zero(); n * n];

    let mut a2 = Tally::new("A2");
    let mut a_upper = vec![T::neg_infinity(); n];
    for &t in &times {
        for m in 0..grid.node_count() {
            let x = grid.point(m);
            spec.rates_into(t, x, &zero, &mut f);
            for i in 0..n {
                if out_of_bounds(f[i]) {
                    a2.offend(t, x, &zero, i, None, f[i].abs());
                } else {
                    a_upper[i] = a_upper[i].max(f[i]);
                }
            }
        }
    }

    let probe_axis: Vec<T> = (0..sampling.u_lattice)
        .map(|k| sampling.u_probe_max * T::from_count(k) / T::from_count(sampling.u_lattice - 1))
        .collect();
    let probe = vec![probe_axis; n];
    let mut a3 = Tally::new("A3");
    let mut competitive = Tally::new("competitive");
    let mut floor = vec![T::infinity(); n];
    for &t in &times {
        for m in 0..grid.node_count() {
            let x = grid.point(m);
            for_each_lattice_point(&probe, |u| {
                spec.jacobian_into(t, x, u, &mut jac);
                for i in 0..n {
                    for j in 0..n {
                        let d = jac[i * n + j];
                        if i == j {
                            if !(d < T::zero()) {
                                a3.offend(t, x, u, i, Some(j), d);
                            } else {
                                floor[i] = floor[i].min(-d);
                            }
                        } else if !(d <= T::zero()) {
                            competitive.offend(t, x, u, i, Some(j), d);
                        }
                    }
                }
                Ok(())
            })?;
        }
    }

    // (A4) lives on the dissipativity box, which needs the (A2)/(A3) constants
    let mut a4 = Tally::new("A4");
    let box_ok = a3.worst.is_none() && a2.worst.is_none();
    let axes: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let side = if box_ok {
                (a_upper[i] / floor[i]).max(T::zero())
            } else {
                sampling.u_probe_max
            };
            (0..sampling.u_lattice)
                .map(|k| side * T::from_count(k) / T::from_count(sampling.u_lattice - 1))
                .collect()
        })
        .collect();
    for &t in &times {
        for m in 0..grid.node_count() {
            let x = grid.point(m);
            for_each_lattice_point(&axes, |u| {
                spec.jacobian_into(t, x, u, &mut jac);
                for i in 0..n {
                    for j in 0..n {
                        let d = jac[i * n + j];
                        if out_of_bounds(d) {
                            a4.offend(t, x, u, i, Some(j), d.abs());
                        }
                    }
                }
                Ok(())
            })?;
        }
    }

    let floors: Vec<String> = floor.iter().map(|v| format!("{v}")).collect();
    Ok(AssumptionReport {
        exact: false,
        checks: vec![
            a2.finish(
                format!("f(t, x, 0) bounded by {BOUND_LIMIT} on {} time samples", times.len()),
                "zero-density growth rate is unbounded or not finite",
            ),
            a3.finish(
                format!("sampled self-limitation floors [{}]", floors.join(", ")),
                "d f_i / d u_i is not negative",
            ),
            a4.finish(
                format!("interaction derivatives bounded by {BOUND_LIMIT} on the box"),
                "interaction derivative is unbounded or not finite on the box",
            ),
            competitive.finish(
                "all sampled cross derivatives are nonpositive".into(),
                "cross derivative d f_i / d u_j is positive",
            ),
        ],
    })
}
