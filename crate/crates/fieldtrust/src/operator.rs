//! Finite-difference operators on the interior subspace.
//!
//! The negative Laplacian with homogeneous Dirichlet conditions is the
//! canonical energy operator here: `E(phi) = 1/2 phi' W L phi - q' W phi`
//! with `W` the diagonal of quadrature weights. Its inverse, computed
//! numerically, plays the role of the Green operator: `G q` solves the
//! discrete source problem, and the physics prior covariance is proportional
//! to the inverse of the weighted form `W L`.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, SourceField};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Relative asymmetry tolerated before an operator is rejected.
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric operator on interior nodes, carrying the quadrature
/// weight that defines the discrete pairing `psi' W phi`.
///
/// Uniform trapezoidal weights on an interior-only grid collapse to a single
/// scalar `w = prod_a h_a`; the full diagonal is `w I`, and the weights sum
/// to the interior cell volume by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    matrix: DMatrix<f64>,
    weight: f64,
}

impl OperatorMatrix {
    /// Wrap a matrix, enforcing symmetry within `1e-12` of its largest entry.
    pub fn new(matrix: DMatrix<f64>, weight: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::LengthMismatch {
                what: "operator columns",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let mut asymmetry: f64 = 0.0;
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric {
                asymmetry: asymmetry / scale,
            });
        }
        Ok(OperatorMatrix { matrix, weight })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Scalar quadrature weight per node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// The quadratic-form matrix `W A` of the discrete pairing.
    pub fn weighted(&self) -> DMatrix<f64> {
        &self.matrix * self.weight
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// Log-determinant of the weighted form `W A` through a symmetric
    /// eigendecomposition, rejecting non-positive spectra.
    pub fn weighted_log_det(&self) -> Result<f64> {
        let eig = SymmetricEigen::new(self.weighted());
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::SingularOperator {
                min_eigenvalue: min,
            });
        }
        Ok(eig.eigenvalues.iter().map(|&l| l.ln()).sum())
    }
}

/// Second-difference negative Laplacian on the interior nodes of `mesh`,
/// with eliminated Dirichlet rows: 3-point stencil in 1D, 5-point in 2D.
pub fn build_laplacian(mesh: &Mesh) -> Result<OperatorMatrix> {
    let shape = mesh.interior_shape();
    let h = mesh.spacing();
    let axis_block = |m: usize, h: f64| {
        let mut a = DMatrix::<f64>::zeros(m, m);
        let inv_h2 = 1.0 / (h * h);
        for i in 0..m {
            a[(i, i)] = 2.0 * inv_h2;
            if i + 1 < m {
                a[(i, i + 1)] = -inv_h2;
                a[(i + 1, i)] = -inv_h2;
            }
        }
        a
    };
    let matrix = match mesh.dim() {
        1 => axis_block(shape[0], h[0]),
        _ => {
            let lx = axis_block(shape[0], h[0]);
            let ly = axis_block(shape[1], h[1]);
            let ix = DMatrix::<f64>::identity(shape[0], shape[0]);
            let iy = DMatrix::<f64>::identity(shape[1], shape[1]);
            // first axis is the fast index, so it sits on the right of the product
            iy.kronecker(&lx) + ly.kronecker(&ix)
        }
    };
    OperatorMatrix::new(matrix, mesh.cell_weight())
}

/// Numerical inverse of an SPD operator: the discrete Green operator.
///
/// The inverse is computed from a Cholesky factorization, symmetrized, and
/// verified against `G L = I` to one part in 1e8. A non-SPD input is
/// reported with its smallest eigenvalue rather than silently regularized.
pub fn green_operator(l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let n = l.dim();
    let chol = Cholesky::new(l.matrix().clone()).ok_or_else(|| {
        let eig = SymmetricEigen::new(l.matrix().clone());
        Error::SingularOperator {
            min_eigenvalue: eig.eigenvalues.min(),
        }
    })?;
    let mut g = chol.inverse();
    // enforce exact symmetry lost to rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let residual = (&g * l.matrix() - DMatrix::<f64>::identity(n, n)).amax();
    if residual > 1e-8 {
        return Err(Error::InverseCheck {
            deviation: residual,
        });
    }
    OperatorMatrix::new(g, l.weight())
}

/// Discrete Dirichlet energy `1/2 phi' W L phi - q' W phi`.
pub fn dirichlet_energy(l: &OperatorMatrix, phi: &DVector<f64>, q: &SourceField) -> f64 {
    let w = l.weight();
    0.5 * w * phi.dot(&l.apply(phi)) - w * q.values().dot(phi)
}

/// Mesh plus the operator pair of the discretized source problem.
///
/// Bundles what every downstream computation needs: the negative Laplacian
/// `L`, its inverse `G`, and the weighted energy form `W L`.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    laplacian: OperatorMatrix,
    green: OperatorMatrix,
    energy_form: DMatrix<f64>,
}

impl Discretization {
    /// Discretize the Poisson problem `-lap(phi) = q`, `phi = 0` on the boundary.
    pub fn poisson(mesh: Mesh) -> Result<Self> {
        let laplacian = build_laplacian(&mesh)?;
        let green = green_operator(&laplacian)?;
        let energy_form = laplacian.weighted();
        Ok(Discretization {
            mesh,
            laplacian,
            green,
            energy_form,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn laplacian(&self) -> &OperatorMatrix {
        &self.laplacian
    }

    pub fn green(&self) -> &OperatorMatrix {
        &self.green
    }

    /// `W L`, the SPD matrix of the energy quadratic form.
    pub fn energy_form(&self) -> &DMatrix<f64> {
        &self.energy_form
    }

    pub fn n(&self) -> usize {
        self.mesh.interior_count()
    }

    /// Mean field of the physics prior: the solution `G q` of the source problem.
    pub fn mean_field(&self, q: &SourceField) -> DVector<f64> {
        self.green.apply(q.values())
    }

    /// Energy of the centered field: `1/2 psi' W L psi`.
    pub fn centered_energy(&self, psi: &DVector<f64>) -> f64 {
        0.5 * psi.dot(&(&self.energy_form * psi))
    }
}
