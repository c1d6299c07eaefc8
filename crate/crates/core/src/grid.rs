//! Vertex-centered grids on intervals and rectangles, nodal fields, and the
//! discrete Laplacian with homogeneous Neumann (reflecting) boundaries.
//!
//! Nodes are ordered lexicographically with axis 0 fastest: node `m` of a
//! 2-D grid sits at `(i, j)` with `m = i + j * n0`. Boundary nodes are part of
//! the grid, so nodal maxima and minima are taken over the closed domain.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{max_of, min_of, Scalar};

/// Shape of a grid: spatial dimension, extent of every axis and node counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridDescriptor<T> {
    pub extents: Vec<T>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    extents: Vec<T>,
    nodes: Vec<usize>,
    spacing: Vec<T>,
    coords: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    /// Builds the grid `[0, L0] x [0, L1]` (or `[0, L0]`), with at least three
    /// nodes per axis.
    pub fn new(descriptor: &GridDescriptor<T>) -> Result<Self> {
        let GridDescriptor { extents, nodes } = descriptor;
        let dim = extents.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if nodes.len() != dim {
            return Err(Error::invalid(format!(
                "{} extents but {} node counts",
                dim,
                nodes.len()
            )));
        }
        for (axis, (&l, &n)) in extents.iter().zip(nodes).enumerate() {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::invalid(format!(
                    "extent of axis {axis} must be positive, got {l}"
                )));
            }
            if n < 3 {
                return Err(Error::invalid(format!("axis {axis} needs at least 3 nodes, got {n}")));
            }
        }
        let spacing: Vec<T> = extents
            .iter()
            .zip(nodes)
            .map(|(&l, &n)| l / T::from_count(n - 1))
            .collect();

        let total: usize = nodes.iter().product();
        let mut coords = Vec::with_capacity(total * dim);
        for m in 0..total {
            let mut rest = m;
            for axis in 0..dim {
                let n = nodes[axis];
                let k = rest % n;
                rest /= n;
                // the last node is pinned to the extent so boundary nodes are exact
                let x = if k == n - 1 {
                    extents[axis]
                } else {
                    extents[axis] * T::from_count(k) / T::from_count(n - 1)
                };
                coords.push(x);
            }
        }
        Ok(Grid {
            extents: extents.clone(),
            nodes: nodes.clone(),
            spacing,
            coords,
        })
    }

    /// Convenience constructor for `[0, length]` with `nodes` points.
    pub fn interval(length: T, nodes: usize) -> Result<Self> {
        Self::new(&GridDescriptor {
            extents: vec![length],
            nodes: vec![nodes],
        })
    }

    pub fn rectangle(extents: [T; 2], nodes: [usize; 2]) -> Result<Self> {
        Self::new(&GridDescriptor {
            extents: extents.to_vec(),
            nodes: nodes.to_vec(),
        })
    }

    pub fn descriptor(&self) -> GridDescriptor<T> {
        GridDescriptor {
            extents: self.extents.clone(),
            nodes: self.nodes.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[T] {
        &self.extents
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Coordinates of node `m`, one entry per axis.
    pub fn point(&self, m: usize) -> &[T] {
        let d = self.dim();
        &self.coords[m * d..(m + 1) * d]
    }

    /// Trapezoidal quadrature weights on the closed domain.
    pub fn quadrature_weights(&self) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.node_count())
            .map(|m| {
                let mut rest = m;
                let mut w = T::one();
                for axis in 0..self.dim() {
                    let n = self.nodes[axis];
                    let k = rest % n;
                    rest /= n;
                    let h = self.spacing[axis];
                    w = w * if k == 0 || k == n - 1 { h * half } else { h };
                }
                w
            })
            .collect()
    }

    /// Stride of `axis` in the flat node ordering.
    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.nodes[..axis].iter().product()
    }

    /// Applies the discrete Neumann Laplacian to one nodal array.
    ///
    /// Second-order central differences per axis; at a boundary node the
    /// missing neighbour is replaced by its mirror image across the boundary.
    pub fn laplacian_into(&self, src: &[T], dst: &mut [T]) {
        debug_assert_eq!(src.len(), self.node_count());
        debug_assert_eq!(dst.len(), src.len());
        dst.iter_mut().for_each(|d| *d = T::zero());
        let two = T::lit(2.0);
        for axis in 0..self.dim() {
            let n = self.nodes[axis];
            let stride = self.stride(axis);
            let inv_h2 = (self.spacing[axis] * self.spacing[axis]).recip();
            for m in 0..src.len() {
                let k = (m / stride) % n;
                let left = if k == 0 { m + stride } else { m - stride };
                let right = if k == n - 1 { m - stride } else { m + stride };
                dst[m] = dst[m] + (src[left] - two * src[m] + src[right]) * inv_h2;
            }
        }
    }

    fn check_field(&self, field: &Field<T>) -> Result<()> {
        if field.shape != self.nodes {
            return Err(Error::invalid(format!(
                "field shape {:?} does not match grid {:?}",
                field.shape, self.nodes
            )));
        }
        Ok(())
    }

    /// Discrete Neumann Laplacian of every species of `field`.
    pub fn neumann_laplacian(&self, field: &Field<T>) -> Result<Field<T>> {
        self.check_field(field)?;
        let mut out = Field::zeros(self, field.n_species());
        for s in 0..field.n_species() {
            self.laplacian_into(field.species(s), out.species_mut(s));
        }
        Ok(out)
    }

    /// Samples a field from a function of position, one closure per species.
    pub fn sample<F>(&self, n_species: usize, mut f: F) -> Field<T>
    where
        F: FnMut(usize, &[T]) -> T,
    {
        let mut field = Field::zeros(self, n_species);
        for s in 0..n_species {
            for m in 0..self.node_count() {
                let value = f(s, self.point(m));
                field.species_mut(s)[m] = value;
            }
        }
        field
    }
}

/// Nodal values of `n_species` densities on a grid, stored species-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    shape: Vec<usize>,
    n_species: usize,
    data: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(grid: &Grid<T>, n_species: usize) -> Self {
        Field {
            shape: grid.nodes.clone(),
            n_species,
            data: vec![T::zero(); n_species * grid.node_count()],
        }
    }

    /// Every species equal to the given constant over the whole grid.
    pub fn constant(grid: &Grid<T>, values: &[T]) -> Self {
        let n = grid.node_count();
        Field {
            shape: grid.nodes.clone(),
            n_species: values.len(),
            data: values.iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect(),
        }
    }

    /// Wraps species-major data. All values must be finite.
    pub fn from_species(grid: &Grid<T>, species: Vec<Vec<T>>) -> Result<Self> {
        let n = grid.node_count();
        if species.iter().any(|s| s.len() != n) {
            return Err(Error::invalid(format!("every species needs {n} nodal values")));
        }
        if species.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Field {
            shape: grid.nodes.clone(),
            n_species: species.len(),
            data: species.into_iter().flatten().collect(),
        })
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn same_layout(&self, other: &Field<T>) -> bool {
        self.shape == other.shape && self.n_species == other.n_species
    }

    pub fn species(&self, s: usize) -> &[T] {
        let n = self.node_count();
        &self.data[s * n..(s + 1) * n]
    }

    pub fn species_mut(&mut self, s: usize) -> &mut [T] {
        let n = self.node_count();
        &mut self.data[s * n..(s + 1) * n]
    }

    pub fn value(&self, s: usize, m: usize) -> T {
        self.data[s * self.node_count() + m]
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Densities of all species at node `m`.
    pub fn node_values(&self, m: usize, out: &mut [T]) {
        let n = self.node_count();
        for (s, o) in out.iter_mut().enumerate().take(self.n_species) {
            *o = self.data[s * n + m];
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Field {
            shape: self.shape.clone(),
            n_species: self.n_species,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Maximum over all nodes, boundary included.
    pub fn sup(&self, species: usize) -> Result<T> {
        self.check_species(species)?;
        Ok(max_of(self.species(species)))
    }

    /// Minimum over all nodes, boundary included.
    pub fn inf(&self, species: usize) -> Result<T> {
        self.check_species(species)?;
        Ok(min_of(self.species(species)))
    }

    fn check_species(&self, species: usize) -> Result<()> {
        if species >= self.n_species {
            return Err(Error::invalid(format!(
                "species index {species} out of range for {} species",
                self.n_species
            )));
        }
        Ok(())
    }

    pub fn all_positive(&self) -> bool {
        self.data.iter().all(|&v| v > T::zero())
    }

    /// Writes one CSV row per node: coordinates, then every species value.
    pub fn write_csv<W: Write>(&self, grid: &Grid<T>, mut out: W) -> io::Result<()> {
        let axes = ["x", "y"];
        let mut header: Vec<String> = axes[..grid.dim()].iter().map(|s| s.to_string()).collect();
        header.extend((1..=self.n_species).map(|s| format!("u{s}")));
        writeln!(out, "{}", header.join(","))?;
        for m in 0..self.node_count() {
            let mut row: Vec<String> = grid.point(m).iter().map(|&x| fmt_sci(x)).collect();
            row.extend((0..self.n_species).map(|s| fmt_sci(self.value(s, m))));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_sci<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

pub fn field_sup<T: Scalar>(field: &Field<T>, species: usize) -> Result<T> {
    field.sup(species)
}

pub fn field_inf<T: Scalar>(field: &Field<T>, species: usize) -> Result<T> {
    field.inf(species)
}
