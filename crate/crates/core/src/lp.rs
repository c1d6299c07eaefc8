//! Dense two-phase tableau simplex with Bland's rule, for the small linear
//! programs of the weight search.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

struct Tableau<T> {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
    tol: T,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v = *v / p;
        }
        let row = self.a[r].clone();
        for (k, other) in self.a.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = other[c];
            if f != T::zero() {
                for (o, &v) in other.iter_mut().zip(&row) {
                    *o = *o - f * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced cost of column `c` for the objective `obj` (maximized).
    fn reduced(&self, obj: &[T], c: usize) -> T {
        let mut z = obj[c];
        for (r, &b) in self.basis.iter().enumerate() {
            z = z - obj[b] * self.a[r][c];
        }
        z
    }

    /// Runs the simplex on `obj`; returns false when unbounded.
    fn optimize(&mut self, obj: &[T], allowed: usize) -> Result<bool> {
        let rhs = self.cols;
        let limit = 50_000;
        for _ in 0..limit {
            let entering = (0..allowed).find(|&c| !self.basis.contains(&c) && self.reduced(obj, c) > self.tol);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][c];
                if coef > self.tol {
                    let ratio = self.a[r][rhs] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - self.tol
                                || ((ratio - lratio).abs() <= self.tol && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::LinearProgram(format!("no convergence after {limit} pivots")))
    }
}

/// Maximizes `objective . x` subject to `constraints` and `x >= 0`.
pub fn maximize<T: Scalar>(objective: &[T], constraints: &[Constraint<T>]) -> Result<LpOutcome<T>> {
    let n = objective.len();
    if constraints.iter().any(|c| c.coeffs.len() != n) {
        return Err(Error::LinearProgram(
            "constraint width differs from the objective".into(),
        ));
    }
    if objective
        .iter()
        .chain(
            constraints
                .iter()
                .flat_map(|c| c.coeffs.iter().chain(std::iter::once(&c.rhs))),
        )
        .any(|v| !v.is_finite())
    {
        return Err(Error::LinearProgram("non-finite coefficient".into()));
    }
    let scale = constraints
        .iter()
        .flat_map(|c| c.coeffs.iter().chain(std::iter::once(&c.rhs)))
        .fold(T::one(), |a, v| a.max(v.abs()));
    let tol = T::epsilon() * T::lit(1e3) * scale;

    // column layout: structural | slack/surplus | artificial
    let m = constraints.len();
    let n_slack = constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let n_art = constraints
        .iter()
        .filter(|c| c.relation != Relation::Le || c.rhs < T::zero())
        .count();
    let cols = n + n_slack + n_art;
    let mut a = vec![vec![T::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut slack, mut art) = (n, n + n_slack);
    for (r, c) in constraints.iter().enumerate() {
        let flip = c.rhs < T::zero();
        let sign = if flip { -T::one() } else { T::one() };
        for j in 0..n {
            a[r][j] = sign * c.coeffs[j];
        }
        a[r][cols] = sign * c.rhs;
        let mut basic = None;
        if c.relation != Relation::Eq {
            let s = if c.relation == Relation::Le {
                T::one()
            } else {
                -T::one()
            };
            a[r][slack] = sign * s;
            if a[r][slack] > T::zero() {
                basic = Some(slack);
            }
            slack += 1;
        }
        if basic.is_none() {
            a[r][art] = T::one();
            basic = Some(art);
            art += 1;
        }
        basis[r] = basic.unwrap();
    }
    let n_art = art - n - n_slack;
    let mut tab = Tableau { a, basis, cols, tol };

    if n_art > 0 {
        let mut phase1 = vec![T::zero(); cols];
        for v in phase1.iter_mut().skip(n + n_slack) {
            *v = -T::one();
        }
        tab.optimize(&phase1, cols)?;
        let infeasibility: T = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= n + n_slack)
            .map(|(r, _)| tab.a[r][cols])
            .fold(T::zero(), |a, v| a + v);
        if infeasibility > tol * T::lit(10.0) {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining zero-level artificials out of the basis
        for r in 0..m {
            if tab.basis[r] >= n + n_slack {
                if let Some(c) = (0..n + n_slack).find(|&c| tab.a[r][c].abs() > tol) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut phase2 = vec![T::zero(); cols];
    phase2[..n].copy_from_slice(objective);
    if !tab.optimize(&phase2, n + n_slack)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![T::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.a[r][cols];
        }
    }
    let value = objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, value })
}
