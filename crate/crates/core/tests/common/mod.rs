#![allow(dead_code)]

use kolmogorov::grid::{Field, Grid};
use kolmogorov::model::{LotkaVolterra, SystemSpec};

pub fn canonical_lv() -> LotkaVolterra<f64> {
    LotkaVolterra::constant(vec![3.0, 2.0], vec![vec![2.0, 0.1], vec![0.1, 2.0]])
}

pub fn canonical() -> SystemSpec<f64> {
    SystemSpec::lotka_volterra(vec![1.0], canonical_lv()).unwrap()
}

pub fn strong_coupling() -> SystemSpec<f64> {
    SystemSpec::lotka_volterra(
        vec![1.0],
        LotkaVolterra::constant(vec![3.0, 2.0], vec![vec![2.0, 1.0], vec![1.0, 2.0]]),
    )
    .unwrap()
}

/// Deterministic pseudo-random numbers in [0, 1) (64-bit LCG, top bits).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

pub fn random_field(grid: &Grid<f64>, n_species: usize, lo: f64, hi: f64, rng: &mut Lcg) -> Field<f64> {
    let species = (0..n_species)
        .map(|_| (0..grid.node_count()).map(|_| rng.range(lo, hi)).collect())
        .collect();
    Field::from_species(grid, species).unwrap()
}

pub fn max_abs_diff(a: &Field<f64>, b: &Field<f64>) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = rhs(t, y)` with tight
/// tolerances, used as an independent reference.
pub fn dopri45(rhs: impl Fn(f64, &[f64]) -> Vec<f64>, y0: &[f64], t0: f64, t1: f64, rtol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h: f64 = 1e-3;
    while t < t1 {
        h = h.min(t1 - t);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
                .collect();
            k.push(rhs(t + C[s] * h, &ys));
        }
        let y5: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>())
            .collect();
        let y4: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..7).map(|s| B4[s] * k[s][i]).sum::<f64>())
            .collect();
        let err = (0..n)
            .map(|i| (y5[i] - y4[i]).abs() / (rtol * y5[i].abs().max(y[i].abs()) + 1e-300))
            .fold(0.0, f64::max);
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}
