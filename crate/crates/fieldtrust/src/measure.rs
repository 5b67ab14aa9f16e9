//! Gaussian measures over the interior field space, and the trust parameter
//! they are indexed by.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Jitter ladder applied to the covariance diagonal before factorization,
/// in units of the mean diagonal entry.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];
/// Most negative eigenvalue tolerated, relative to the largest.
const INDEFINITE_TOL: f64 = 1e-10;

/// Gaussian measure `N(mean, covariance)` on interior nodal values.
///
/// Construction factorizes the covariance once, climbing a fixed jitter
/// ladder for matrices that are positive semidefinite but numerically
/// rank-deficient; the jitter actually applied is recorded in
/// `jitter_used`. A covariance with an eigenvalue below `-1e-10` of its
/// largest is rejected as indefinite rather than regularized. The all-zero
/// covariance is accepted as a point mass.
#[derive(Debug, Clone)]
pub struct GaussianFieldMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: Option<DMatrix<f64>>,
    factor: Option<Cholesky<f64, Dyn>>,
    jitter_used: f64,
}

impl GaussianFieldMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::build(mean, covariance, None)
    }

    /// Like `new`, but records the exact precision matrix when the caller
    /// knows it analytically, avoiding a numerical inversion later.
    pub fn with_precision(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        precision: DMatrix<f64>,
    ) -> Result<Self> {
        Self::build(mean, covariance, Some(precision))
    }

    fn build(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        precision: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::LengthMismatch {
                what: "covariance rows",
                expected: n,
                got: covariance.nrows(),
            });
        }
        let scale = covariance.amax();
        let mut asymmetry: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                asymmetry = asymmetry.max((covariance[(i, j)] - covariance[(j, i)]).abs());
            }
        }
        if scale > 0.0 && asymmetry > 1e-12 * scale {
            return Err(Error::NotSymmetric {
                asymmetry: asymmetry / scale,
            });
        }

        let mean_diag = covariance.trace() / n as f64;
        if mean_diag == 0.0 && scale == 0.0 {
            // exact point mass
            return Ok(GaussianFieldMeasure {
                mean,
                covariance,
                precision,
                factor: None,
                jitter_used: 0.0,
            });
        }

        let mut chosen = None;
        for (step, unit) in JITTER_LADDER.iter().enumerate() {
            let jitter = unit * mean_diag;
            let mut trial = covariance.clone();
            for i in 0..n {
                trial[(i, i)] += jitter;
            }
            if let Some(f) = Cholesky::new(trial) {
                chosen = Some((f, jitter));
                break;
            }
            if step == 0 {
                // only climb the ladder for semidefinite spectra
                let eig = SymmetricEigen::new(covariance.clone());
                let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
                if min < -INDEFINITE_TOL * max.abs().max(f64::MIN_POSITIVE) {
                    return Err(Error::SingularOperator {
                        min_eigenvalue: min,
                    });
                }
            }
        }
        let (factor, jitter_used) = chosen.ok_or(Error::FactorizationFailed {
            max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * mean_diag,
        })?;
        Ok(GaussianFieldMeasure {
            mean,
            covariance,
            precision,
            factor: Some(factor),
            jitter_used,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Diagonal regularization added to factorize the covariance, zero when
    /// none was needed.
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Precision matrix: the stored analytic one when available, otherwise
    /// computed from the covariance factorization.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        if let Some(p) = &self.precision {
            return Ok(p.clone());
        }
        let factor = self.factor.as_ref().ok_or(Error::SingularOperator {
            min_eigenvalue: 0.0,
        })?;
        let mut p = factor.inverse();
        for i in 0..p.nrows() {
            for j in (i + 1)..p.ncols() {
                let s = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = s;
                p[(j, i)] = s;
            }
        }
        Ok(p)
    }

    /// Draw `count` fields; a seed fully determines the output.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        (0..count)
            .map(|_| match &self.factor {
                None => self.mean.clone(),
                Some(f) => {
                    let z =
                        DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
                    &self.mean + f.l() * z
                }
            })
            .collect()
    }
}

/// Scalar model-trust parameter, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    beta: f64,
}

impl ParameterState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::NonPositiveBeta(beta));
        }
        Ok(ParameterState { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Hyperprior on the trust parameter.
///
/// `Flat` adds nothing; `Jeffreys` is the scale-invariant choice, adding
/// `log beta` to the potential; `Gaussian` pins the trust near a stated
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrustPrior {
    Flat,
    Jeffreys,
    Gaussian { mean: f64, variance: f64 },
}

impl TrustPrior {
    /// Contribution to the negative log posterior.
    pub fn potential(&self, beta: f64) -> f64 {
        match *self {
            TrustPrior::Flat => 0.0,
            TrustPrior::Jeffreys => beta.ln(),
            TrustPrior::Gaussian { mean, variance } => {
                0.5 * (beta - mean) * (beta - mean) / variance
                    + 0.5 * (2.0 * std::f64::consts::PI * variance).ln()
            }
        }
    }

    pub fn grad(&self, beta: f64) -> f64 {
        match *self {
            TrustPrior::Flat => 0.0,
            TrustPrior::Jeffreys => 1.0 / beta,
            TrustPrior::Gaussian { mean, variance } => (beta - mean) / variance,
        }
    }

    pub fn hessian(&self, beta: f64) -> f64 {
        match *self {
            TrustPrior::Flat => 0.0,
            TrustPrior::Jeffreys => -1.0 / (beta * beta),
            TrustPrior::Gaussian { variance, .. } => 1.0 / variance,
        }
    }
}
