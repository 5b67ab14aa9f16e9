//! Uniform tensor meshes over boxes in one or two dimensions.
//!
//! Fields live on the *interior* nodes only: homogeneous Dirichlet conditions
//! pin the boundary to zero, so boundary nodes carry no degrees of freedom and
//! are eliminated from every vector and operator in the crate. The interior
//! node set is the finite subspace on which all measures, energies, and traces
//! are taken; in particular the identity operator on it has trace equal to the
//! interior node count.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// Uniform grid on a box `[lo_1, hi_1] x ... x [lo_d, hi_d]`, `d` in {1, 2}.
///
/// `nodes[a]` counts nodes along axis `a` *including* the two boundary nodes,
/// so the interior holds `nodes[a] - 2` per axis. Interior nodes are ordered
/// with the first axis fastest: in 2D, index `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    extents: Vec<(f64, f64)>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<f64>, // interior node coordinates, row i at [i*dim .. i*dim+dim]
}

impl Mesh {
    /// Build a mesh from per-axis extents and node counts (boundary included).
    pub fn new(extents: &[(f64, f64)], nodes: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if dim == 0 || dim > 2 {
            return Err(Error::BadDimension(dim));
        }
        if nodes.len() != dim {
            return Err(Error::LengthMismatch {
                what: "node counts",
                expected: dim,
                got: nodes.len(),
            });
        }
        for (axis, (&(lo, hi), &k)) in extents.iter().zip(nodes).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::BadExtent { axis, lo, hi });
            }
            if k < 3 {
                return Err(Error::TooFewNodes { axis, nodes: k });
            }
        }
        let spacing: Vec<f64> = extents
            .iter()
            .zip(nodes)
            .map(|(&(lo, hi), &k)| (hi - lo) / (k - 1) as f64)
            .collect();

        let shape: Vec<usize> = nodes.iter().map(|&k| k - 2).collect();
        let count: usize = shape.iter().product();
        let mut coords = Vec::with_capacity(count * dim);
        match dim {
            1 => {
                for ix in 0..shape[0] {
                    coords.push(extents[0].0 + (ix + 1) as f64 * spacing[0]);
                }
            }
            _ => {
                for iy in 0..shape[1] {
                    for ix in 0..shape[0] {
                        coords.push(extents[0].0 + (ix + 1) as f64 * spacing[0]);
                        coords.push(extents[1].0 + (iy + 1) as f64 * spacing[1]);
                    }
                }
            }
        }
        Ok(Mesh {
            extents: extents.to_vec(),
            nodes: nodes.to_vec(),
            spacing,
            coords,
        })
    }

    /// Unit interval `[0, 1]` with `nodes` grid points, `nodes - 2` interior.
    pub fn unit_interval(nodes: usize) -> Result<Self> {
        Self::new(&[(0.0, 1.0)], &[nodes])
    }

    /// Unit square `[0, 1]^2` with `nodes` grid points per axis.
    pub fn unit_square(nodes: usize) -> Result<Self> {
        Self::new(&[(0.0, 1.0), (0.0, 1.0)], &[nodes, nodes])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    /// Grid spacing per axis.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Interior node count per axis.
    pub fn interior_shape(&self) -> Vec<usize> {
        self.nodes.iter().map(|&k| k - 2).collect()
    }

    /// Total number of interior nodes: the dimension of the field space.
    pub fn interior_count(&self) -> usize {
        self.nodes.iter().map(|&k| k - 2).product()
    }

    /// Coordinates of interior node `i`.
    pub fn coord(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Quadrature weight of one interior node: the cell volume `prod_a h_a`.
    ///
    /// Trapezoidal weights on a uniform grid are constant away from the
    /// boundary; the boundary rows are eliminated, so a single weight serves
    /// every retained node.
    pub fn cell_weight(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Volume covered by the interior cells, `prod_a (k_a - 2) h_a`.
    pub fn interior_volume(&self) -> f64 {
        self.cell_weight() * self.interior_count() as f64
    }

    /// True when `x` lies strictly inside the open box.
    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.extents)
                .all(|(&v, &(lo, hi))| v > lo && v < hi)
    }

    /// Discrete L2 pairing of two interior-node vectors: `sum_i w a_i b_i`.
    pub fn pair(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        debug_assert_eq!(a.len(), self.interior_count());
        debug_assert_eq!(b.len(), self.interior_count());
        self.cell_weight() * a.dot(b)
    }

    /// Sample a function on the interior nodes.
    pub fn sample_fn(&self, f: impl Fn(&[f64]) -> f64) -> DVector<f64> {
        DVector::from_iterator(
            self.interior_count(),
            (0..self.interior_count()).map(|i| f(self.coord(i))),
        )
    }
}

/// Source term of the field equation, stored as interior nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    values: DVector<f64>,
}

impl SourceField {
    pub fn new(mesh: &Mesh, values: DVector<f64>) -> Result<Self> {
        if values.len() != mesh.interior_count() {
            return Err(Error::LengthMismatch {
                what: "source values",
                expected: mesh.interior_count(),
                got: values.len(),
            });
        }
        Ok(SourceField { values })
    }

    pub fn zero(mesh: &Mesh) -> Self {
        SourceField {
            values: DVector::zeros(mesh.interior_count()),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        SourceField {
            values: mesh.sample_fn(f),
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_interior_coords() {
        let mesh = Mesh::unit_interval(5).unwrap();
        assert_eq!(mesh.interior_count(), 3);
        assert_eq!(mesh.spacing(), &[0.25]);
        let xs: Vec<f64> = (0..3).map(|i| mesh.coord(i)[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn square_ordering_first_axis_fastest() {
        let mesh = Mesh::unit_square(4).unwrap();
        assert_eq!(mesh.interior_count(), 4);
        // nodes at 1/3 and 2/3 per axis; index iy*2 + ix
        let c = |i: usize| (mesh.coord(i)[0], mesh.coord(i)[1]);
        let h = 1.0 / 3.0;
        assert_eq!(c(0), (h, h));
        assert_eq!(c(1), (2.0 * h, h));
        assert_eq!(c(2), (h, 2.0 * h));
        assert_eq!(c(3), (2.0 * h, 2.0 * h));
    }

    #[test]
    fn weights_cover_interior_volume() {
        let mesh = Mesh::new(&[(0.0, 2.0), (1.0, 2.0)], &[9, 6]).unwrap();
        let w = mesh.cell_weight();
        assert!((w - 0.25 * 0.2).abs() < 1e-15);
        let total = w * mesh.interior_count() as f64;
        assert!((total - mesh.interior_volume()).abs() < 1e-15);
        // (k - 2) cells of width h per axis: the box less one spacing
        let expect = (2.0 - 0.25) * (1.0 - 0.2);
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(Mesh::new(&[(0.0, 1.0)], &[2]).is_err());
        assert!(Mesh::new(&[(1.0, 1.0)], &[5]).is_err());
        assert!(Mesh::new(&[], &[]).is_err());
        assert!(Mesh::new(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], &[4, 4, 4]).is_err());
    }

    #[test]
    fn strict_interior_test() {
        let mesh = Mesh::unit_interval(9).unwrap();
        assert!(mesh.contains_strictly(&[0.5]));
        assert!(!mesh.contains_strictly(&[0.0]));
        assert!(!mesh.contains_strictly(&[1.0]));
        assert!(!mesh.contains_strictly(&[-0.1]));
    }

    #[test]
    fn pairing_converges_at_second_order_for_boundary_vanishing_products() {
        // integral of sin(pi x) * x(1-x) on [0,1] = 4/pi^3
        let exact = 4.0 / std::f64::consts::PI.powi(3);
        let err = |nodes: usize| {
            let mesh = Mesh::unit_interval(nodes).unwrap();
            let a = mesh.sample_fn(|x| (std::f64::consts::PI * x[0]).sin());
            let b = mesh.sample_fn(|x| x[0] * (1.0 - x[0]));
            (mesh.pair(&a, &b) - exact).abs()
        };
        let (e1, e2) = (err(33), err(65));
        // halving h should cut the error by about 4
        assert!(e2 < e1 / 3.2, "e1 = {e1:.3e}, e2 = {e2:.3e}");
        assert!(e1 < 1e-2);
    }
}
