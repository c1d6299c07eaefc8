//! Exact propagator `exp(c L_h)` of the discrete Neumann Laplacian on a box.
//!
//! Per axis, the reflecting stencil is diagonalized by the cosine modes
//! `cos(k pi i / (n - 1))` with eigenvalues `-(4 / h^2) sin^2(k pi / (2 (n - 1)))`,
//! orthogonal under trapezoidal weights. The axes commute, so the propagator
//! is applied one axis at a time.

use crate::grid::Grid;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct CosineExponential<T> {
    /// Dense `n_k x n_k` propagator per axis, row-major.
    axes: Vec<Vec<T>>,
    nodes: Vec<usize>,
    buf: Vec<T>,
}

fn axis_propagator<T: Scalar>(n: usize, h: T, c: T) -> Vec<T> {
    let last = T::from_count(n - 1);
    let pi = T::PI();
    let half = T::lit(0.5);
    let weight = |i: usize| if i == 0 || i == n - 1 { half } else { T::one() };
    let norm = |k: usize| if k == 0 || k == n - 1 { last } else { last * half };
    let mut out = vec![T::zero(); n * n];
    for k in 0..n {
        let theta = pi * T::from_count(k) / last;
        let s = (theta * half).sin();
        let decay = (-c * T::lit(4.0) * s * s / (h * h)).exp() / norm(k);
        if decay == T::zero() {
            continue;
        }
        let mode: Vec<T> = (0..n).map(|i| (theta * T::from_count(i)).cos()).collect();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + decay * mode[i] * mode[j] * weight(j);
            }
        }
    }
    // the exact propagator is entrywise nonnegative; drop rounding noise
    for v in out.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

impl<T: Scalar> CosineExponential<T> {
    pub(crate) fn new(grid: &Grid<T>, c: T) -> Self {
        let axes = (0..grid.dim())
            .map(|a| axis_propagator(grid.nodes_per_axis()[a], grid.spacing()[a], c))
            .collect();
        CosineExponential {
            axes,
            nodes: grid.nodes_per_axis().to_vec(),
            buf: vec![T::zero(); grid.node_count()],
        }
    }

    pub(crate) fn apply_in_place(&mut self, values: &mut [T]) {
        let total = values.len();
        for (axis, prop) in self.axes.iter().enumerate() {
            let n = self.nodes[axis];
            let stride: usize = self.nodes[..axis].iter().product();
            for m in 0..total {
                let i = (m / stride) % n;
                let base = m - i * stride;
                let row = &prop[i * n..(i + 1) * n];
                let mut acc = T::zero();
                for (j, &p) in row.iter().enumerate() {
                    acc = acc + p * values[base + j * stride];
                }
                self.buf[m] = acc;
            }
            values.copy_from_slice(&self.buf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagates_cosine_mode_exactly() {
        let grid = Grid::<f64>::interval(1.0, 21).unwrap();
        let h = 0.05;
        let lambda = -4.0 / (h * h) * (std::f64::consts::PI / 40.0).sin().powi(2);
        let mut prop = CosineExponential::new(&grid, 0.1);
        let mut v: Vec<f64> = (0..21)
            .map(|i| (std::f64::consts::PI * i as f64 / 20.0).cos())
            .collect();
        let expect: Vec<f64> = v.iter().map(|x| x * (0.1 * lambda).exp()).collect();
        prop.apply_in_place(&mut v);
        for (a, b) in v.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn small_time_matches_first_order_expansion() {
        let grid = Grid::<f64>::rectangle([1.0, 2.0], [9, 7]).unwrap();
        let c = 1e-7;
        let mut prop = CosineExponential::new(&grid, c);
        let u: Vec<f64> = (0..grid.node_count()).map(|m| 1.0 + (m as f64 * 0.37).sin()).collect();
        let mut lap = vec![0.0; u.len()];
        grid.laplacian_into(&u, &mut lap);
        let mut v = u.clone();
        prop.apply_in_place(&mut v);
        for m in 0..u.len() {
            assert!((v[m] - u[m] - c * lap[m]).abs() < 1e-9);
        }
    }

    #[test]
    fn conserves_mass_and_constants() {
        let grid = Grid::<f64>::interval(1.0, 15).unwrap();
        let w = grid.quadrature_weights();
        let mut prop = CosineExponential::new(&grid, 0.05);
        let u: Vec<f64> = (0..15).map(|i| 0.1 + (i % 4) as f64).collect();
        let mut v = u.clone();
        prop.apply_in_place(&mut v);
        let mass = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        assert!((mass(&u) - mass(&v)).abs() < 1e-12);
        let mut c = vec![2.0; 15];
        prop.apply_in_place(&mut c);
        assert!(c.iter().all(|x| (x - 2.0).abs() < 1e-13));
    }
}
