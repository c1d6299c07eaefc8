//! Banded LU without pivoting, for the strictly diagonally dominant
//! diffusion matrices `I - c L`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct BandedLu<T> {
    n: usize,
    bw: usize,
    /// Row `i` holds columns `i - bw ..= i + bw` at offsets `0 ..= 2 bw`.
    band: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.band[i * self.width() + j + self.bw - i]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        let w = self.width();
        &mut self.band[i * w + j + self.bw - i]
    }

    /// Assembles and factors `I - c L_h` for the Neumann Laplacian of `grid`.
    pub(crate) fn diffusion(grid: &Grid<T>, c: T) -> Result<Self> {
        let n = grid.node_count();
        let bw = grid.stride(grid.dim() - 1);
        let mut lu = BandedLu {
            n,
            bw,
            band: vec![T::zero(); n * (2 * bw + 1)],
        };
        for m in 0..n {
            *lu.at_mut(m, m) = T::one();
        }
        let two = T::lit(2.0);
        for axis in 0..grid.dim() {
            let nk = grid.nodes_per_axis()[axis];
            let stride = grid.stride(axis);
            let h = grid.spacing()[axis];
            let w = c / (h * h);
            for m in 0..n {
                let k = (m / stride) % nk;
                let left = if k == 0 { m + stride } else { m - stride };
                let right = if k == nk - 1 { m - stride } else { m + stride };
                *lu.at_mut(m, m) = lu.at(m, m) + two * w;
                *lu.at_mut(m, left) = lu.at(m, left) - w;
                *lu.at_mut(m, right) = lu.at(m, right) - w;
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.at(k, k);
            if !(pivot.abs() > T::min_positive_value()) || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot at row {k}")));
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..end {
                    let v = self.at(i, j) - l * self.at(k, j);
                    *self.at_mut(i, j) = v;
                }
            }
        }
        Ok(())
    }

    /// Overwrites `rhs` with the solution.
    pub(crate) fn solve_in_place(&self, rhs: &mut [T]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = rhs[i];
            for j in start..i {
                s = s - self.at(i, j) * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = rhs[i];
            for j in i + 1..end {
                s = s - self.at(i, j) * rhs[j];
            }
            rhs[i] = s / self.at(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(grid: &Grid<f64>, c: f64, x: &[f64], b: &[f64]) -> f64 {
        let mut lap = vec![0.0; x.len()];
        grid.laplacian_into(x, &mut lap);
        x.iter()
            .zip(&lap)
            .zip(b)
            .map(|((xi, li), bi)| (xi - c * li - bi).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn solves_one_and_two_dimensional_systems() {
        for grid in [
            Grid::<f64>::interval(1.0, 17).unwrap(),
            Grid::<f64>::rectangle([1.0, 0.5], [7, 5]).unwrap(),
        ] {
            let lu = BandedLu::diffusion(&grid, 0.3).unwrap();
            let b: Vec<f64> = (0..grid.node_count()).map(|m| 1.0 + ((m * 7) % 5) as f64).collect();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            assert!(residual(&grid, 0.3, &x, &b) < 1e-11);
            // discrete maximum principle of the M-matrix inverse
            let (lo, hi) = (1.0, 5.0);
            assert!(x.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn preserves_constants() {
        let grid = Grid::<f64>::rectangle([2.0, 1.0], [9, 6]).unwrap();
        let lu = BandedLu::diffusion(&grid, 5.0).unwrap();
        let mut x = vec![0.7; grid.node_count()];
        lu.solve_in_place(&mut x);
        assert!(x.iter().all(|v| (v - 0.7).abs() < 1e-12));
    }
}
