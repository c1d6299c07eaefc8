mod common;

use std::sync::Arc;

use common::*;
use kolmogorov::error::Error;
use kolmogorov::grid::{Field, Grid};
use kolmogorov::model::{
    coefficient_bounds, LotkaVolterra, RateFn, SampledSystem, SamplingPolicy, SpatialProfile, SystemSpec,
};
use kolmogorov::solver::{simulate, simulate_pair, step, DiffusionScheme, SolveControls};

const PI: f64 = std::f64::consts::PI;

#[test]
fn x_independent_data_stays_x_independent() {
    let spec = canonical();
    let grid = Grid::interval(1.0, 21).unwrap();
    let u0 = Field::constant(&grid, &[0.4, 1.7]);
    let traj = simulate(&spec, &grid, &u0, &SolveControls::new(0.01, 2.0, 10)).unwrap();
    for snap in &traj.snapshots {
        for s in 0..2 {
            let spread = snap.sup(s).unwrap() - snap.inf(s).unwrap();
            assert!(spread < 1e-12, "spread {spread}");
        }
    }
}

#[test]
fn logistic_endpoint_matches_closed_form() {
    let spec = SystemSpec::lotka_volterra(vec![1.0], LotkaVolterra::constant(vec![1.0], vec![vec![1.0]])).unwrap();
    let grid = Grid::interval(1.0, 5).unwrap();
    let u0 = Field::constant(&grid, &[0.1]);
    let traj = simulate(&spec, &grid, &u0, &SolveControls::new(1e-3, 10.0, 1000)).unwrap();
    let (t, last) = traj.last().unwrap();
    assert!((t - 10.0f64).abs() < 1e-9);
    let exact = 0.1 / (0.1 + 0.9 * (-10.0f64).exp());
    for m in 0..grid.node_count() {
        assert!((last.value(0, m) - exact).abs() < 1e-6);
    }
    assert_eq!(traj.times.len(), 11);
    assert_eq!(traj.meta.steps, 10_000);
}

#[test]
fn positivity_survives_huge_steps_and_rough_data() {
    let mut lv = canonical_lv();
    lv.a_space = vec![4.0, -3.0];
    lv.profile = SpatialProfile::Cosine;
    let spec = SystemSpec::lotka_volterra(vec![1.0], lv).unwrap();
    let grid = Grid::interval(1.0, 31).unwrap();
    let mut rng = Lcg(7);
    let u0 = random_field(&grid, 2, 1e-6, 5.0, &mut rng);
    for dt in [1e-3, 0.1, 2.0, 25.0] {
        for scheme in [DiffusionScheme::BackwardEuler, DiffusionScheme::CosineExponential] {
            let traj = simulate(
                &spec,
                &grid,
                &u0,
                &SolveControls::new(dt, 50.0, 1).with_diffusion(scheme),
            )
            .unwrap();
            assert!(traj.failure.is_none(), "dt {dt} {scheme:?}: {:?}", traj.failure);
            assert!(traj.snapshots.iter().all(|f| f.all_positive()));
        }
    }
}

#[test]
fn equilibrium_is_stationary() {
    // a = B u*
    let det: f64 = 2.0 * 2.0 - 0.1 * 0.1;
    let star: [f64; 2] = [(3.0 * 2.0 - 0.1 * 2.0) / det, (2.0 * 2.0 - 0.1 * 3.0) / det];
    assert!((star[0] - 1.4536).abs() < 1e-4 && (star[1] - 0.9273).abs() < 1e-4);
    let spec = canonical();
    let grid = Grid::interval(1.0, 11).unwrap();
    let traj = simulate(
        &spec,
        &grid,
        &Field::constant(&grid, &star),
        &SolveControls::new(1e-3, 10.0, 100),
    )
    .unwrap();
    for snap in &traj.snapshots {
        for s in 0..2 {
            assert!(snap.species(s).iter().all(|v| (v - star[s]).abs() < 1e-8));
        }
    }
}

#[test]
fn solutions_enter_the_dissipativity_box() {
    let spec = canonical();
    let grid = Grid::interval(1.0, 41).unwrap();
    let mut rng = Lcg(11);
    let u0 = random_field(&grid, 2, 0.01, 6.0, &mut rng);
    let traj = simulate(&spec, &grid, &u0, &SolveControls::new(1e-2, 10.0, 100)).unwrap();
    let (_, last) = traj.last().unwrap();
    assert!(last.sup(0).unwrap() <= 1.5 + 0.01);
    assert!(last.sup(1).unwrap() <= 1.0 + 0.01);
}

#[test]
fn trajectories_started_in_the_box_stay_in_every_enlargement() {
    let spec = canonical();
    let bounds = coefficient_bounds(&spec, 0.0, &SamplingPolicy::default()).unwrap();
    let grid = Grid::interval(1.0, 31).unwrap();
    let mut rng = Lcg(5);
    let species = (0..2)
        .map(|s| (0..31).map(|_| rng.range(0.01, bounds.box_upper[s])).collect())
        .collect();
    let u0 = Field::from_species(&grid, species).unwrap();
    let traj = simulate(&spec, &grid, &u0, &SolveControls::new(5e-3, 10.0, 20)).unwrap();
    for eps in [1e-3, 1e-2, 0.1] {
        for snap in &traj.snapshots {
            for s in 0..2 {
                assert!(snap.sup(s).unwrap() <= bounds.box_upper[s] + eps);
            }
        }
    }
}

/// With x-independent coefficients and data the PDE reduces to the ODE
/// `u_i' = f_i(t, u) u_i`, integrated here by an independent adaptive method.
#[test]
fn ode_reduction_matches_reference_integration() {
    let mut lv = canonical_lv();
    lv.a_amp = vec![1.0, 0.5];
    lv.a_freq = vec![1.0, 2.0];
    lv.a_phase = vec![0.0, 0.3];
    lv.b_amp = vec![vec![0.5, 0.05], vec![0.05, 0.3]];
    lv.b_freq = vec![vec![0.5, 1.0], vec![1.5, 1.0]];
    let spec = SystemSpec::lotka_volterra(vec![1.0], lv.clone()).unwrap();
    let grid = Grid::interval(1.0, 5).unwrap();
    let y0 = [0.2, 2.5];
    let traj = simulate(
        &spec,
        &grid,
        &Field::constant(&grid, &y0),
        &SolveControls::new(1e-3, 20.0, 1000),
    )
    .unwrap();
    let rhs = |t: f64, y: &[f64]| -> Vec<f64> {
        (0..2)
            .map(|i| {
                let a = lv.a0[i] + lv.a_amp[i] * (lv.a_freq[i] * t + lv.a_phase[i]).sin();
                let f = a
                    - (0..2)
                        .map(|j| (lv.b0[i][j] + lv.b_amp[i][j] * (lv.b_freq[i][j] * t).cos()) * y[j])
                        .sum::<f64>();
                f * y[i]
            })
            .collect()
    };
    for (k, &t) in traj.times.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let reference = dopri45(rhs, &y0, 0.0, t, 1e-11);
        for s in 0..2 {
            let rel = (traj.snapshots[k].value(s, 2) - reference[s]).abs() / reference[s];
            assert!(rel < 1e-5, "t = {t}, species {s}, rel err {rel}");
        }
    }
}

fn endpoint_differences(scheme: DiffusionScheme) -> Vec<f64> {
    let mut lv = canonical_lv();
    lv.a_space = vec![0.5, -0.3];
    lv.profile = SpatialProfile::Cosine;
    lv.a_amp = vec![0.5, 0.2];
    lv.a_freq = vec![2.0, 1.0];
    let spec = SystemSpec::lotka_volterra(vec![1.0], lv).unwrap();
    let grid = Grid::interval(1.0, 51).unwrap();
    let u0 = grid.sample(2, |s, x| {
        if s == 0 {
            1.0 + 0.5 * (PI * x[0]).cos()
        } else {
            0.8 - 0.3 * (2.0 * PI * x[0]).cos()
        }
    });
    let ends: Vec<Field<f64>> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let c = SolveControls::new(dt, 1.0, usize::MAX).with_diffusion(scheme);
            simulate(&spec, &grid, &u0, &c).unwrap().last().unwrap().1.clone()
        })
        .collect();
    ends.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect()
}

#[test]
fn dt_halving_with_exact_diffusion_is_second_order() {
    let d = endpoint_differences(DiffusionScheme::CosineExponential);
    let ratio = d[0] / d[1];
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

/// Backward-Euler half-steps cap the splitting at first order.
#[test]
fn dt_halving_with_backward_euler_is_first_order() {
    let d = endpoint_differences(DiffusionScheme::BackwardEuler);
    let ratio = d[0] / d[1];
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn pair_with_equal_data_is_identical() {
    let spec = canonical();
    let grid = Grid::interval(1.0, 21).unwrap();
    let mut rng = Lcg(3);
    let u0 = random_field(&grid, 2, 0.5, 2.0, &mut rng);
    let pair = simulate_pair(&spec, &grid, &u0, &u0, &SolveControls::new(1e-2, 1.0, 5)).unwrap();
    assert_eq!(pair.u, pair.v);
    assert_eq!(pair.times.len(), 21);
}

#[test]
fn pair_rejects_mismatched_grids() {
    let spec = canonical();
    let grid = Grid::interval(1.0, 21).unwrap();
    let other = Grid::interval(1.0, 11).unwrap();
    let u0 = Field::constant(&grid, &[1.0, 1.0]);
    let v0 = Field::constant(&other, &[1.0, 1.0]);
    assert!(matches!(
        simulate_pair(&spec, &grid, &u0, &v0, &SolveControls::new(1e-2, 1.0, 1)),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn rejects_bad_inputs() {
    let spec = canonical();
    let grid = Grid::interval(1.0, 5).unwrap();
    let zero = Field::constant(&grid, &[1.0, 0.0]);
    assert!(simulate(&spec, &grid, &zero, &SolveControls::new(1e-2, 1.0, 1)).is_err());
    let ok = Field::constant(&grid, &[1.0, 1.0]);
    assert!(simulate(&spec, &grid, &ok, &SolveControls::new(0.0, 1.0, 1)).is_err());
    assert!(simulate(&spec, &grid, &ok, &SolveControls::new(1e-2, 1.0, 0)).is_err());
    let wrong_domain = Grid::interval(2.0, 5).unwrap();
    assert!(simulate(
        &spec,
        &wrong_domain,
        &Field::constant(&wrong_domain, &[1.0, 1.0]),
        &SolveControls::new(1e-2, 1.0, 1)
    )
    .is_err());
    assert!(step(&spec, &grid, &ok, 0.0, -1.0).is_err());
}

#[test]
fn single_step_matches_simulate() {
    let spec = canonical();
    let grid = Grid::rectangle([1.0, 1.0], [6, 5]).unwrap();
    let spec2 = SystemSpec::lotka_volterra(vec![1.0, 1.0], canonical_lv()).unwrap();
    assert!(step(&spec, &grid, &Field::constant(&grid, &[1.0, 1.0]), 0.0, 0.1).is_err());
    let mut rng = Lcg(9);
    let u0 = random_field(&grid, 2, 0.5, 1.5, &mut rng);
    let one = step(&spec2, &grid, &u0, 0.0, 0.05).unwrap();
    let traj = simulate(&spec2, &grid, &u0, &SolveControls::new(0.05, 0.05, 1)).unwrap();
    assert_eq!(&one, traj.last().unwrap().1);
}

#[test]
fn collapse_aborts_with_partial_trajectory() {
    let death: RateFn<f64> = Arc::new(|_, _, _, out| out[0] = -1e5);
    let jac: RateFn<f64> = Arc::new(|_, _, _, out| out[0] = -1.0);
    let spec = SystemSpec::sampled(vec![1.0], SampledSystem::new(1, death, jac, 0.0).unwrap()).unwrap();
    let grid = Grid::interval(1.0, 5).unwrap();
    let traj = simulate(
        &spec,
        &grid,
        &Field::constant(&grid, &[1.0]),
        &SolveControls::new(0.01, 1.0, 1),
    )
    .unwrap();
    assert!(matches!(traj.failure, Some(Error::Positivity { species: 0, .. })));
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.meta.rejected_steps, 1);
    assert!(traj.into_result().is_err());
}
