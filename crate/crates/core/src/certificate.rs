//! Sufficient conditions for global attractivity: the average conditions,
//! the permanence box `[delta_lower, delta_upper]`, the column dominance
//! condition, the weight search, and the decay constants `gamma`, `Z`.

use serde::{Deserialize, Serialize};

use crate::averages::{estimate_averages, AverageEstimate, AveragePolicy};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lp::{maximize, Constraint, LpOutcome, Relation};
use crate::model::{coefficient_bounds, BoundsReport, SamplingPolicy, SystemSpec};
use crate::scalar::Scalar;

/// Largest species count accepted by the weight search.
pub const MAX_WEIGHT_SPECIES: usize = 64;

/// Lower bound imposed on every weight.
pub const WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Margins<T> {
    pub holds: bool,
    pub margins: Vec<T>,
}

impl<T: Scalar> Margins<T> {
    fn strict(margins: Vec<T>) -> Self {
        Margins {
            holds: margins.iter().all(|&m| m > T::zero()),
            margins,
        }
    }
}

/// `sum_{j != i} b_upper[i][j] * v[j] / b_lower[j]`.
fn row_pressure<T: Scalar>(bounds: &BoundsReport<T>, i: usize, v: &[T]) -> T {
    (0..bounds.n_species())
        .filter(|&j| j != i)
        .map(|j| bounds.b_upper[i][j] * v[j] / bounds.b_lower[j])
        .sum()
}

fn check_shapes<T: Scalar>(bounds: &BoundsReport<T>, avg: &AverageEstimate<T>) -> Result<()> {
    if avg.n_species() != bounds.n_species() || avg.upper.len() != bounds.n_species() {
        return Err(Error::invalid("averages and bounds describe different species counts"));
    }
    Ok(())
}

/// Average condition: `m_i - sum_{j != i} b_upper_ij M_j / b_lower_jj > 0`.
pub fn check_ac<T: Scalar>(bounds: &BoundsReport<T>, avg: &AverageEstimate<T>) -> Result<Margins<T>> {
    check_shapes(bounds, avg)?;
    Ok(Margins::strict(
        (0..bounds.n_species())
            .map(|i| avg.m[i] - row_pressure(bounds, i, &avg.upper))
            .collect(),
    ))
}

/// As [`check_ac`] with the upper averages replaced by the suprema `a_upper`.
pub fn check_ac_prime<T: Scalar>(bounds: &BoundsReport<T>, avg: &AverageEstimate<T>) -> Result<Margins<T>> {
    check_shapes(bounds, avg)?;
    Ok(Margins::strict(
        (0..bounds.n_species())
            .map(|i| avg.m[i] - row_pressure(bounds, i, &bounds.a_upper))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PermanenceBounds<T> {
    /// Unset when the positivity condition fails.
    pub delta_lower: Option<T>,
    pub delta_upper: T,
    /// `a_lower_i - sum_{j != i} b_upper_ij a_upper_j / b_lower_jj`.
    pub condition: Margins<T>,
}

/// `delta_upper = max a_upper_i / b_lower_ii` and
/// `delta_lower = min (a_lower_i - sum_{j != i} b_upper_ij a_upper_j / b_lower_jj) / b_upper_ii`.
pub fn permanence_bounds<T: Scalar>(bounds: &BoundsReport<T>) -> PermanenceBounds<T> {
    let n = bounds.n_species();
    let delta_upper = (0..n)
        .map(|i| bounds.a_upper[i] / bounds.b_lower[i])
        .fold(T::neg_infinity(), T::max);
    let condition = Margins::strict(
        (0..n)
            .map(|i| bounds.a_lower[i] - row_pressure(bounds, i, &bounds.a_upper))
            .collect(),
    );
    let delta_lower = condition.holds.then(|| {
        (0..n)
            .map(|i| condition.margins[i] / bounds.b_upper[i][i])
            .fold(T::infinity(), T::min)
    });
    PermanenceBounds {
        delta_lower,
        delta_upper,
        condition,
    }
}

fn check_deltas<T: Scalar>(delta_lower: T, delta_upper: T) -> Result<()> {
    if !(delta_lower > T::zero()) || !(delta_upper >= delta_lower) || !delta_upper.is_finite() {
        return Err(Error::Precondition(format!(
            "need 0 < delta_lower <= delta_upper, got {delta_lower}, {delta_upper}"
        )));
    }
    Ok(())
}

/// Column dominance: `delta_lower b_lower_ii - delta_upper sum_{j != i} b_upper_ji > 0`.
/// Note the transposed index against [`check_ac`].
pub fn check_cond21<T: Scalar>(delta_lower: T, delta_upper: T, bounds: &BoundsReport<T>) -> Result<Margins<T>> {
    check_deltas(delta_lower, delta_upper)?;
    let n = bounds.n_species();
    Ok(Margins::strict(
        (0..n)
            .map(|i| {
                let column: T = (0..n).filter(|&j| j != i).map(|j| bounds.b_upper[j][i]).sum();
                delta_lower * bounds.b_lower[i] - delta_upper * column
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Weights<T> {
    pub alpha: Vec<T>,
    /// `min_i sum_j C_ij alpha_j`, positive.
    pub slack: T,
}

/// Maximizes `s` subject to `sum_j c[i][j] alpha_j >= s`, `sum alpha = 1` and
/// `alpha_i >= 1e-9`. Returns `None` when the optimum is not positive.
pub fn solve_dominance<T: Scalar>(c: &[Vec<T>]) -> Result<Option<Weights<T>>> {
    let n = c.len();
    if n == 0 || n > MAX_WEIGHT_SPECIES {
        return Err(Error::invalid(format!(
            "weight search supports 1..={MAX_WEIGHT_SPECIES} species, got {n}"
        )));
    }
    if c.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("dominance matrix must be square"));
    }
    let floor = T::lit(WEIGHT_FLOOR);
    // variables: beta = alpha - floor (n), s_plus, s_minus
    let mut rows: Vec<Constraint<T>> = c
        .iter()
        .map(|row| {
            let mut coeffs = row.clone();
            coeffs.push(-T::one());
            coeffs.push(T::one());
            let shift: T = row.iter().copied().sum::<T>() * floor;
            Constraint {
                coeffs,
                relation: Relation::Ge,
                rhs: -shift,
            }
        })
        .collect();
    let mut total = vec![T::one(); n];
    total.extend([T::zero(), T::zero()]);
    rows.push(Constraint {
        coeffs: total,
        relation: Relation::Eq,
        rhs: T::one() - T::from_count(n) * floor,
    });
    let mut objective = vec![T::zero(); n];
    objective.extend([T::one(), -T::one()]);
    match maximize(&objective, &rows)? {
        LpOutcome::Optimal { x, .. } => {
            let alpha: Vec<T> = x[..n].iter().map(|&b| b + floor).collect();
            // re-evaluate the slack from the weights rather than trusting the tableau
            let slack = c
                .iter()
                .map(|row| row.iter().zip(&alpha).map(|(&a, &b)| a * b).sum::<T>())
                .fold(T::infinity(), T::min);
            Ok((slack > T::zero()).then_some(Weights { alpha, slack }))
        }
        LpOutcome::Infeasible => Err(Error::LinearProgram("weight program reported infeasible".into())),
        LpOutcome::Unbounded => Err(Error::LinearProgram("weight program reported unbounded".into())),
    }
}

/// Dominance matrix with `C_ii = delta_lower b_lower_ii` and
/// `C_ij = -delta_upper b_upper_ji`.
pub fn dominance_matrix<T: Scalar>(delta_lower: T, delta_upper: T, bounds: &BoundsReport<T>) -> Vec<Vec<T>> {
    let n = bounds.n_species();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        delta_lower * bounds.b_lower[i]
                    } else {
                        -delta_upper * bounds.b_upper[j][i]
                    }
                })
                .collect()
        })
        .collect()
}

/// Positive weights with `alpha_i delta_lower b_lower_ii > sum_{j != i} alpha_j delta_upper b_upper_ji`,
/// maximizing the smallest slack, or `None` if no such weights exist.
pub fn find_weights<T: Scalar>(delta_lower: T, delta_upper: T, bounds: &BoundsReport<T>) -> Result<Option<Weights<T>>> {
    check_deltas(delta_lower, delta_upper)?;
    solve_dominance(&dominance_matrix(delta_lower, delta_upper, bounds))
}

/// Weighted average condition:
/// `alpha_i m_i - sum_{j != i} (alpha_i b_upper_ij M_j / b_lower_jj + alpha_j b_upper_ji M_i / b_lower_ii) >= 0`.
pub fn check_weighted_ac<T: Scalar>(
    avg: &AverageEstimate<T>,
    bounds: &BoundsReport<T>,
    alpha: &[T],
) -> Result<Margins<T>> {
    check_shapes(bounds, avg)?;
    let n = bounds.n_species();
    if alpha.len() != n || alpha.iter().any(|&a| !(a > T::zero())) {
        return Err(Error::Precondition("weights must be positive, one per species".into()));
    }
    let margins: Vec<T> = (0..n)
        .map(|i| {
            let cross: T = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    alpha[i] * bounds.b_upper[i][j] * avg.upper[j] / bounds.b_lower[j]
                        + alpha[j] * bounds.b_upper[j][i] * avg.upper[i] / bounds.b_lower[i]
                })
                .sum();
            alpha[i] * avg.m[i] - cross
        })
        .collect();
    Ok(Margins {
        holds: margins.iter().all(|&m| m >= T::zero()),
        margins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct CertificatePolicy<T> {
    /// Externally supplied `(delta_lower, delta_upper)`; bypasses the
    /// requirement that the strengthened average condition holds.
    pub delta_override: Option<(T, T)>,
    pub epsilon_start: T,
    pub epsilon_min: T,
    pub sampling: SamplingPolicy<T>,
    pub averages: AveragePolicy<T>,
}

impl<T: Scalar> Default for CertificatePolicy<T> {
    fn default() -> Self {
        CertificatePolicy {
            delta_override: None,
            epsilon_start: T::lit(0.1),
            epsilon_min: T::lit(1e-6),
            sampling: SamplingPolicy::default(),
            averages: AveragePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpsilonStep<T> {
    pub epsilon: T,
    pub cond21: Margins<T>,
    pub feasible: bool,
    pub slack: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Certificate<T> {
    pub granted: bool,
    /// First failing condition of a denied certificate.
    pub first_failure: Option<String>,
    pub n_species: usize,
    pub ac: Margins<T>,
    pub ac_prime: Margins<T>,
    pub delta_condition: Margins<T>,
    pub delta_lower: Option<T>,
    pub delta_upper: T,
    pub delta_overridden: bool,
    /// Column dominance at the accepted (or last tried) enlargement.
    pub cond21: Option<Margins<T>>,
    pub weighted_ac: Option<Margins<T>>,
    pub epsilon_box: Option<T>,
    pub alpha: Option<Vec<T>>,
    pub slack: Option<T>,
    pub gamma: Option<T>,
    #[serde(rename = "Z")]
    pub amplitude: Option<T>,
    pub epsilon_trace: Vec<EpsilonStep<T>>,
    pub averages: AverageEstimate<T>,
    /// Bounds at the accepted enlargement, or at zero when none was reached.
    pub bounds: BoundsReport<T>,
}

impl<T: Scalar> Certificate<T> {
    /// `(alpha_max, alpha_min)` of a granted certificate.
    pub fn alpha_extremes(&self) -> Option<(T, T)> {
        let alpha = self.alpha.as_ref()?;
        Some((
            alpha.iter().copied().fold(T::neg_infinity(), T::max),
            alpha.iter().copied().fold(T::infinity(), T::min),
        ))
    }
}

/// Computes the averages on `grid` and assembles the certificate.
pub fn assemble_certificate<T: Scalar>(
    spec: &SystemSpec<T>,
    grid: &Grid<T>,
    policy: &CertificatePolicy<T>,
) -> Result<Certificate<T>> {
    let avg = estimate_averages(spec, grid, &policy.averages)?;
    assemble_with_averages(spec, avg, policy)
}

/// Runs bounds, average conditions, permanence box, column dominance and the
/// weight search, halving `epsilon` from `epsilon_start` until the weights are
/// feasible or it drops below `epsilon_min`.
pub fn assemble_with_averages<T: Scalar>(
    spec: &SystemSpec<T>,
    averages: AverageEstimate<T>,
    policy: &CertificatePolicy<T>,
) -> Result<Certificate<T>> {
    if !(policy.epsilon_start > T::zero()) || !(policy.epsilon_min > T::zero()) {
        return Err(Error::invalid("epsilon_start and epsilon_min must be positive"));
    }
    let bounds0 = coefficient_bounds(spec, T::zero(), &policy.sampling)?;
    let ac = check_ac(&bounds0, &averages)?;
    let ac_prime = check_ac_prime(&bounds0, &averages)?;
    let permanence = permanence_bounds(&bounds0);
    let (delta_lower, delta_upper) = match policy.delta_override {
        Some((lo, hi)) => {
            check_deltas(lo, hi)?;
            (Some(lo), hi)
        }
        None => (permanence.delta_lower, permanence.delta_upper),
    };
    let mut cert = Certificate {
        granted: false,
        first_failure: None,
        n_species: spec.n_species(),
        ac,
        ac_prime,
        delta_condition: permanence.condition.clone(),
        delta_lower,
        delta_upper,
        delta_overridden: policy.delta_override.is_some(),
        cond21: None,
        weighted_ac: None,
        epsilon_box: None,
        alpha: None,
        slack: None,
        gamma: None,
        amplitude: None,
        epsilon_trace: Vec::new(),
        averages,
        bounds: bounds0,
    };
    if !cert.delta_overridden {
        let failure = if !cert.ac.holds {
            Some("ac")
        } else if !cert.ac_prime.holds {
            Some("ac_prime")
        } else if !permanence.condition.holds {
            Some("delta_lower")
        } else {
            None
        };
        if let Some(f) = failure {
            cert.first_failure = Some(f.to_string());
            return Ok(cert);
        }
    }
    let delta_lower = delta_lower.expect("checked above");

    let mut epsilon = policy.epsilon_start;
    let mut accepted = None;
    while epsilon >= policy.epsilon_min {
        let bounds = coefficient_bounds(spec, epsilon, &policy.sampling)?;
        let cond21 = check_cond21(delta_lower, delta_upper, &bounds)?;
        let weights = find_weights(delta_lower, delta_upper, &bounds)?;
        cert.epsilon_trace.push(EpsilonStep {
            epsilon,
            cond21: cond21.clone(),
            feasible: weights.is_some(),
            slack: weights.as_ref().map(|w| w.slack),
        });
        cert.cond21 = Some(cond21);
        if let Some(w) = weights {
            accepted = Some((epsilon, bounds, w));
            break;
        }
        epsilon = epsilon * T::lit(0.5);
    }

    match accepted {
        None => {
            let cond21_failed = cert.cond21.as_ref().is_some_and(|c| !c.holds);
            cert.first_failure = Some(if cond21_failed { "cond21" } else { "weights" }.to_string());
        }
        Some((epsilon, bounds, w)) => {
            cert.weighted_ac = Some(check_weighted_ac(&cert.averages, &bounds, &w.alpha)?);
            let alpha_max = w.alpha.iter().copied().fold(T::neg_infinity(), T::max);
            let alpha_min = w.alpha.iter().copied().fold(T::infinity(), T::min);
            cert.gamma = Some(w.slack / alpha_max);
            cert.amplitude = Some(delta_upper * alpha_max / (delta_lower * alpha_min));
            cert.epsilon_box = Some(epsilon);
            cert.slack = Some(w.slack);
            cert.alpha = Some(w.alpha);
            cert.bounds = bounds;
            cert.granted = true;
        }
    }
    Ok(cert)
}
