//! Independent checks: Monte Carlo moments of quadratic functionals and
//! finite-difference derivatives.
//!
//! Every closed-form identity used by the potential calculus has an oracle
//! here that knows nothing about the derivation: sampling for expectations
//! of `1/2 phi' A phi`, central differences for derivatives in the trust
//! parameter. Tests compare the two routes and require agreement within
//! stated statistical or truncation bounds.

use crate::measure::GaussianFieldMeasure;
use nalgebra::{DMatrix, DVector};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Absolute deviation from a reference value, in standard errors.
    pub fn deviation_in_se(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

fn half_quadratic(a: &DMatrix<f64>, phi: &DVector<f64>) -> f64 {
    0.5 * phi.dot(&(a * phi))
}

fn mc_statistic(
    a: &DMatrix<f64>,
    measure: &GaussianFieldMeasure,
    samples: usize,
    seed: u64,
    f: impl Fn(f64) -> f64,
) -> McEstimate {
    let draws = measure.sample(samples, seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for phi in &draws {
        let v = f(half_quadratic(a, phi));
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
    McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        samples,
    }
}

/// Monte Carlo estimate of `E[1/2 phi' A phi]` under `measure`.
pub fn mc_quadratic_mean(
    a: &DMatrix<f64>,
    measure: &GaussianFieldMeasure,
    samples: usize,
    seed: u64,
) -> McEstimate {
    mc_statistic(a, measure, samples, seed, |v| v)
}

/// Monte Carlo estimate of `E[(1/2 phi' A phi)^2]` under `measure`.
pub fn mc_quadratic_second_moment(
    a: &DMatrix<f64>,
    measure: &GaussianFieldMeasure,
    samples: usize,
    seed: u64,
) -> McEstimate {
    mc_statistic(a, measure, samples, seed, |v| v * v)
}

/// Closed form of `E[1/2 phi' A phi]` for `phi ~ N(m, D)`:
/// `1/2 m' A m + 1/2 tr(A D)`.
pub fn quadratic_mean(a: &DMatrix<f64>, m: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    half_quadratic(a, m) + 0.5 * (a * d).trace()
}

/// Closed form of `E[(1/2 phi' A phi)^2]` for `phi ~ N(m, D)`:
/// `1/4 (m'Am)^2 + 1/2 (m'Am) tr(AD) + m'ADAm + 1/2 tr(ADAD) + 1/4 tr(AD)^2`.
pub fn quadratic_second_moment(a: &DMatrix<f64>, m: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let am = a * m;
    let mam = m.dot(&am);
    let ad = a * d;
    let tr_ad = ad.trace();
    let adam = am.dot(&(d * &am));
    let tr_adad = (&ad * &ad).trace();
    0.25 * mam * mam + 0.5 * mam * tr_ad + adam + 0.5 * tr_adad + 0.25 * tr_ad * tr_ad
}

/// Closed form of `Var[1/2 phi' A phi]`: `m'ADAm + 1/2 tr(ADAD)`.
pub fn quadratic_variance(a: &DMatrix<f64>, m: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let am = a * m;
    let ad = a * d;
    am.dot(&(d * &am)) + 0.5 * (&ad * &ad).trace()
}

/// Finite-difference derivative with Richardson extrapolation.
#[derive(Debug, Clone, Copy)]
pub struct FdEstimate {
    /// Extrapolated derivative.
    pub value: f64,
    /// Relative gap between the two step sizes before extrapolation.
    pub disagreement: f64,
    /// Set when the two step sizes disagree by more than 1e-4 relative:
    /// the function is too rough at this point for the stencil to be trusted.
    pub flagged: bool,
}

/// Central-difference derivative of `f` at `x`, `order` 1 or 2.
///
/// Uses step `1e-5 * max(1, |x|)` and a half step, then Richardson
/// extrapolation of the two second-order estimates.
pub fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, order: usize) -> FdEstimate {
    assert!(order == 1 || order == 2, "order must be 1 or 2");
    let eps = 1e-5 * x.abs().max(1.0);
    let stencil = |e: f64| -> f64 {
        match order {
            1 => (f(x + e) - f(x - e)) / (2.0 * e),
            _ => (f(x + e) - 2.0 * f(x) + f(x - e)) / (e * e),
        }
    };
    let coarse = stencil(eps);
    let fine = stencil(0.5 * eps);
    let value = fine + (fine - coarse) / 3.0;
    let disagreement = (fine - coarse).abs() / value.abs().max(f64::MIN_POSITIVE);
    FdEstimate {
        value,
        disagreement,
        flagged: disagreement > 1e-4,
    }
}
