//! Closed-form calculus of the trust-parameter potential.
//!
//! The negative log posterior of the trust parameter has derivatives that
//! are pure Gaussian moments, no differentiation of determinants required:
//!
//! * gradient: posterior expected energy minus prior expected energy, plus
//!   the hyperprior slope;
//! * Hessian: prior energy variance minus posterior energy variance, plus
//!   the hyperprior curvature.
//!
//! The difference of energy variances is the *informativeness margin*: when
//! it is positive the data genuinely constrain the trust parameter, the
//! potential is locally strictly convex, and a gradient root is an honest
//! optimum.
//!
//! The potential is linear in the trust parameter with a single energy
//! component; the component machinery below keeps the calculus in the
//! general several-component form and instantiates it with that one.

use crate::error::{Error, Result};
use crate::measure::{ParameterState, TrustPrior};
use crate::measurement::MeasurementSetup;
use crate::mesh::SourceField;
use crate::operator::Discretization;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

/// Quadratic-form components `F_i(phi) = 1/2 phi' A_i phi` of a potential
/// `H(phi; lambda) = sum_i lambda_i F_i(phi)` linear in its parameters.
#[derive(Debug, Clone)]
pub struct EnergyBasis {
    components: Vec<DMatrix<f64>>,
}

impl EnergyBasis {
    pub fn new(components: Vec<DMatrix<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("energy basis"));
        }
        Ok(EnergyBasis { components })
    }

    /// The model's one-component basis: the weighted energy form `W L`.
    pub fn for_model(disc: &Discretization) -> Self {
        EnergyBasis {
            components: vec![disc.energy_form().clone()],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[DMatrix<f64>] {
        &self.components
    }

    /// `E[F_i(phi)]` under `N(mean, cov)` for each component.
    pub fn expected(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.components
                .iter()
                .map(|a| crate::oracle::quadratic_mean(a, mean, cov)),
        )
    }

    /// `Cov[F_i(phi), F_j(phi)]` under `N(mean, cov)`:
    /// `m' A_i D A_j m + 1/2 tr(A_i D A_j D)`.
    pub fn covariance(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.len();
        let ad: Vec<DMatrix<f64>> = self.components.iter().map(|a| a * cov).collect();
        let am: Vec<DVector<f64>> = self.components.iter().map(|a| a * mean).collect();
        let mut c = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = am[i].dot(&(cov * &am[j])) + 0.5 * (&ad[i] * &ad[j]).trace();
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }
}

/// Centered posterior moments at a fixed trust value: the mean of
/// `psi = phi - G q` and the posterior covariance.
pub(crate) struct CenteredPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

pub(crate) fn centered_posterior(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    beta: f64,
) -> Result<CenteredPosterior> {
    let mut precision = disc.energy_form() * beta;
    if !setup.is_empty() {
        precision += setup.information_matrix();
    }
    let chol = Cholesky::new(precision.clone()).ok_or_else(|| {
        let eig = SymmetricEigen::new(precision);
        Error::SingularOperator {
            min_eigenvalue: eig.eigenvalues.min(),
        }
    })?;
    let mut cov = chol.inverse();
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let mean = if setup.is_empty() {
        DVector::zeros(disc.n())
    } else {
        let data = setup.data().ok_or(Error::Empty("measurement data"))?;
        let residual = data - setup.matrix() * disc.mean_field(q);
        chol.solve(&setup.weighted_pullback(&residual))
    };
    Ok(CenteredPosterior { mean, cov })
}

/// Everything the calculus yields at one trust value.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialCalculusReport {
    pub beta: f64,
    pub prior_expected_energy: f64,
    pub posterior_expected_energy: f64,
    /// Full gradient of the negative log posterior in the trust parameter.
    pub grad: f64,
    pub prior_covariance: f64,
    pub posterior_covariance: f64,
    /// `prior_covariance - posterior_covariance`; positive means the data
    /// constrain the trust parameter at this point.
    pub informativeness_margin: f64,
    /// Full second derivative, hyperprior curvature included.
    pub hessian: f64,
}

/// Expected energy under the prior: `n / (2 beta)`, independent of the
/// operator because the energy form cancels against its own inverse.
pub fn prior_expected_energy(disc: &Discretization, state: &ParameterState) -> f64 {
    0.5 * disc.n() as f64 / state.beta()
}

/// Expected energy under the posterior:
/// `1/2 m' (W L) m + 1/2 tr((W L) S)` with centered posterior mean `m`.
pub fn posterior_expected_energy(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
) -> Result<f64> {
    let post = centered_posterior(disc, q, setup, state.beta())?;
    Ok(crate::oracle::quadratic_mean(
        disc.energy_form(),
        &post.mean,
        &post.cov,
    ))
}

/// Variance of the energy under prior and posterior:
/// `(n / (2 beta^2), m' A S A m + 1/2 tr(A S A S))` with `A = W L`.
pub fn grad_covariances(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
) -> Result<(f64, f64)> {
    let beta = state.beta();
    let post = centered_posterior(disc, q, setup, beta)?;
    let prior_cov = 0.5 * disc.n() as f64 / (beta * beta);
    let post_cov =
        crate::oracle::quadratic_variance(disc.energy_form(), &post.mean, &post.cov);
    Ok((prior_cov, post_cov))
}

/// Gradient of the trust potential: posterior minus prior expected energy
/// plus the hyperprior slope. Matches a finite difference of
/// `marginal_neg_log_posterior` to truncation error.
pub fn grad_param_potential(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
    prior: &TrustPrior,
) -> Result<f64> {
    Ok(report(disc, q, setup, state, prior)?.grad)
}

/// Second derivative of the trust potential: energy-variance difference
/// plus the hyperprior curvature.
pub fn hessian_param_potential(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
    prior: &TrustPrior,
) -> Result<f64> {
    Ok(report(disc, q, setup, state, prior)?.hessian)
}

/// Informativeness margin `Var_prior[E] - Var_posterior[E]` at one point.
pub fn informativeness_check(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
) -> Result<f64> {
    let (prior_cov, post_cov) = grad_covariances(disc, q, setup, state)?;
    Ok(prior_cov - post_cov)
}

/// Evaluate the whole calculus at one trust value with a single
/// factorization.
pub fn report(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    state: &ParameterState,
    prior: &TrustPrior,
) -> Result<PotentialCalculusReport> {
    let beta = state.beta();
    let n = disc.n() as f64;
    let post = centered_posterior(disc, q, setup, beta)?;
    let basis = EnergyBasis::for_model(disc);
    let post_energy = basis.expected(&post.mean, &post.cov)[0];
    let post_cov = basis.covariance(&post.mean, &post.cov)[(0, 0)];
    let prior_energy = 0.5 * n / beta;
    let prior_cov = 0.5 * n / (beta * beta);
    let margin = prior_cov - post_cov;
    Ok(PotentialCalculusReport {
        beta,
        prior_expected_energy: prior_energy,
        posterior_expected_energy: post_energy,
        grad: post_energy - prior_energy + prior.grad(beta),
        prior_covariance: prior_cov,
        posterior_covariance: post_cov,
        informativeness_margin: margin,
        hessian: margin + prior.hessian(beta),
    })
}

/// Outcome of scanning the trust potential over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WellPosedness {
    /// One descending-to-ascending gradient crossing, refined to a root.
    WeaklyWellPosed { beta_star: f64 },
    /// The gradient never changes sign on the grid.
    NoRoot,
    /// Crossing structure inconsistent with a convex potential.
    NotConvex { beta: f64 },
}

/// Classify the potential on an ascending grid of trust values.
///
/// A degenerate setup (no data, gradient identically zero) reports
/// `NoRoot`: the marginal is flat and nothing is learned about trust.
pub fn wellposedness_verdict(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    grid: &[f64],
) -> Result<WellPosedness> {
    if grid.len() < 2 {
        return Err(Error::Empty("trust grid"));
    }
    let n = disc.n() as f64;
    // The gradient is a difference of energies of size n/(2 beta), so values
    // below roundoff at that scale carry no sign information. A run without
    // data lands here with every entry negligible.
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &beta in grid {
        let state = ParameterState::new(beta)?;
        let grad = report(disc, q, setup, &state, prior)?.grad;
        if grad.abs() > 1e-12 * n / (2.0 * beta) {
            points.push((beta, grad));
        }
    }
    let mut crossings: Vec<(usize, bool)> = Vec::new(); // (left index, rising)
    for i in 0..points.len().saturating_sub(1) {
        let (a, b) = (points[i].1, points[i + 1].1);
        if a * b < 0.0 {
            crossings.push((i, a < 0.0));
        }
    }
    match crossings.as_slice() {
        [] => Ok(WellPosedness::NoRoot),
        [(i, true)] => {
            let beta_star = refine_root(disc, q, setup, prior, points[*i].0, points[*i + 1].0)?;
            Ok(WellPosedness::WeaklyWellPosed { beta_star })
        }
        [(i, false)] => Ok(WellPosedness::NotConvex { beta: points[*i].0 }),
        more => Ok(WellPosedness::NotConvex {
            beta: points[more[1].0].0,
        }),
    }
}

/// Bisect the gradient to `|grad| <= 1e-8 * n/(2 beta)` inside a bracket.
pub(crate) fn refine_root(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let n = disc.n() as f64;
    let eval = |beta: f64| -> Result<f64> {
        let state = ParameterState::new(beta)?;
        Ok(report(disc, q, setup, &state, prior)?.grad)
    };
    let mut g_lo = eval(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g_mid = eval(mid)?;
        if g_mid.abs() <= 1e-8 * (0.5 * n / mid) || (hi - lo) < 1e-14 * mid {
            return Ok(mid);
        }
        if (g_lo < 0.0) == (g_mid < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::build_measurement;
    use crate::mesh::Mesh;
    use crate::oracle::fd_derivative;
    use crate::posterior::marginal_neg_log_posterior;

    fn mismatch_problem(nodes: usize, sigma: f64) -> (Discretization, SourceField, MeasurementSetup) {
        let mesh = Mesh::unit_interval(nodes).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| 10.0 * (2.0 * x[0] - 0.3));
        // data generated from a deliberately different source
        let q_wrong = SourceField::from_fn(&mesh, |x| {
            10.0 * (2.0 * x[0] - 0.3) + 6.0 * (std::f64::consts::PI * x[0]).sin()
        });
        let truth = disc.mean_field(&q_wrong);
        let locs: Vec<Vec<f64>> = (1..9).map(|i| vec![i as f64 / 9.0]).collect();
        let setup = build_measurement(&mesh, &locs, sigma)
            .unwrap()
            .observe(&truth, 61)
            .unwrap();
        (disc, q, setup)
    }

    #[test]
    fn gradient_matches_evidence_slope() {
        let (disc, q, setup) = mismatch_problem(18, 0.05);
        for prior in [TrustPrior::Flat, TrustPrior::Jeffreys] {
            for beta in [0.5, 1.0, 2.0] {
                let state = ParameterState::new(beta).unwrap();
                let grad = grad_param_potential(&disc, &q, &setup, &state, &prior).unwrap();
                let fd = fd_derivative(
                    |b| {
                        marginal_neg_log_posterior(
                            &disc,
                            &q,
                            &setup,
                            &ParameterState::new(b).unwrap(),
                            &prior,
                        )
                        .unwrap()
                    },
                    beta,
                    1,
                );
                assert!(!fd.flagged);
                assert!(
                    (grad - fd.value).abs() <= 1e-6 * grad.abs().max(1.0),
                    "beta {beta}: {grad} vs {}",
                    fd.value
                );
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_slope() {
        let (disc, q, setup) = mismatch_problem(18, 0.05);
        for prior in [TrustPrior::Flat, TrustPrior::Jeffreys] {
            for beta in [0.5, 1.0, 2.0] {
                let state = ParameterState::new(beta).unwrap();
                let hess = hessian_param_potential(&disc, &q, &setup, &state, &prior).unwrap();
                let fd = fd_derivative(
                    |b| {
                        grad_param_potential(
                            &disc,
                            &q,
                            &setup,
                            &ParameterState::new(b).unwrap(),
                            &prior,
                        )
                        .unwrap()
                    },
                    beta,
                    1,
                );
                assert!(
                    (hess - fd.value).abs() <= 1e-5 * hess.abs().max(1.0),
                    "beta {beta}: {hess} vs {}",
                    fd.value
                );
            }
        }
    }

    #[test]
    fn prior_moments_match_numeric_traces() {
        // closed forms n/(2 beta) and n/(2 beta^2) against explicit traces
        for nodes in [3usize, 6, 66] {
            let mesh = Mesh::unit_interval(nodes).unwrap();
            let disc = Discretization::poisson(mesh).unwrap();
            let n = disc.n();
            for beta in [0.1, 1.0, 10.0] {
                let state = ParameterState::new(beta).unwrap();
                let lam = disc.energy_form();
                let s = disc.green().matrix() / (beta * disc.green().weight());
                let tr_ls = (lam * &s).trace();
                let closed = prior_expected_energy(&disc, &state);
                assert!(
                    (0.5 * tr_ls - closed).abs() <= 1e-12 * closed,
                    "n {n} beta {beta}: energy {} vs {closed}",
                    0.5 * tr_ls
                );
                let ls = lam * &s;
                let tr_lsls = (&ls * &ls).trace();
                let closed_cov = 0.5 * n as f64 / (beta * beta);
                assert!(
                    (0.5 * tr_lsls - closed_cov).abs() <= 1e-12 * closed_cov,
                    "n {n} beta {beta}: cov {} vs {closed_cov}",
                    0.5 * tr_lsls
                );
            }
        }
    }

    #[test]
    fn without_data_the_potential_is_flat() {
        let mesh = Mesh::unit_interval(12).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| x[0]);
        let setup = build_measurement(&mesh, &[], 0.1).unwrap();
        let state = ParameterState::new(1.7).unwrap();
        let post = posterior_expected_energy(&disc, &q, &setup, &state).unwrap();
        let prior = prior_expected_energy(&disc, &state);
        assert!((post - prior).abs() < 1e-10 * prior);
        let grad = grad_param_potential(&disc, &q, &setup, &state, &TrustPrior::Flat).unwrap();
        assert!(grad.abs() < 1e-10);
        let margin = informativeness_check(&disc, &q, &setup, &state).unwrap();
        assert!(margin.abs() < 1e-10 * prior);
        let grid: Vec<f64> = (0..20).map(|i| 0.1 * (i + 1) as f64).collect();
        let verdict =
            wellposedness_verdict(&disc, &q, &setup, &TrustPrior::Flat, &grid).unwrap();
        assert_eq!(verdict, WellPosedness::NoRoot);
    }

    #[test]
    fn posterior_energy_variance_agrees_with_moment_identity() {
        let (disc, q, setup) = mismatch_problem(14, 0.1);
        let state = ParameterState::new(0.8).unwrap();
        let post = centered_posterior(&disc, &q, &setup, state.beta()).unwrap();
        let a = disc.energy_form();
        let second = crate::oracle::quadratic_second_moment(a, &post.mean, &post.cov);
        let mean = crate::oracle::quadratic_mean(a, &post.mean, &post.cov);
        let (_, post_cov) = grad_covariances(&disc, &q, &setup, &state).unwrap();
        assert!((second - mean * mean - post_cov).abs() <= 1e-12 * second.abs());
    }

    #[test]
    fn mismatch_run_is_weakly_well_posed() {
        let (disc, q, setup) = mismatch_problem(18, 0.05);
        let grid: Vec<f64> = (0..=60)
            .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0))
            .collect();
        let verdict =
            wellposedness_verdict(&disc, &q, &setup, &TrustPrior::Flat, &grid).unwrap();
        match verdict {
            WellPosedness::WeaklyWellPosed { beta_star } => {
                let state = ParameterState::new(beta_star).unwrap();
                let g = grad_param_potential(&disc, &q, &setup, &state, &TrustPrior::Flat)
                    .unwrap();
                assert!(g.abs() <= 1e-8 * 0.5 * disc.n() as f64 / beta_star);
                // margin must certify the root as informative
                let margin = informativeness_check(&disc, &q, &setup, &state).unwrap();
                assert!(margin > 0.0);
            }
            other => panic!("expected a well-posed verdict, got {other:?}"),
        }
    }

    #[test]
    fn grid_minimum_sits_at_the_gradient_root() {
        let (disc, q, setup) = mismatch_problem(18, 0.05);
        let prior = TrustPrior::Flat;
        let grid: Vec<f64> = (0..=120)
            .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 120.0))
            .collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&b| {
                marginal_neg_log_posterior(
                    &disc,
                    &q,
                    &setup,
                    &ParameterState::new(b).unwrap(),
                    &prior,
                )
                .unwrap()
            })
            .collect();
        let argmin = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let verdict = wellposedness_verdict(&disc, &q, &setup, &prior, &grid).unwrap();
        let WellPosedness::WeaklyWellPosed { beta_star } = verdict else {
            panic!("expected well-posed");
        };
        // root lies within one grid cell of the discrete minimizer
        let lo = grid[argmin.saturating_sub(1)];
        let hi = grid[(argmin + 1).min(grid.len() - 1)];
        assert!(
            beta_star >= lo && beta_star <= hi,
            "root {beta_star} outside [{lo}, {hi}]"
        );
    }

    #[test]
    fn energy_basis_stays_general() {
        let mesh = Mesh::unit_interval(8).unwrap();
        let disc = Discretization::poisson(mesh).unwrap();
        let basis = EnergyBasis::for_model(&disc);
        assert_eq!(basis.len(), 1);
        // two-component basis: expected values and covariance keep shape
        let two = EnergyBasis::new(vec![
            disc.energy_form().clone(),
            DMatrix::identity(disc.n(), disc.n()),
        ])
        .unwrap();
        let mean = DVector::from_element(disc.n(), 0.2);
        let cov = DMatrix::identity(disc.n(), disc.n()) * 0.3;
        let e = two.expected(&mean, &cov);
        let c = two.covariance(&mean, &cov);
        assert_eq!(e.len(), 2);
        assert_eq!(c.shape(), (2, 2));
        assert!((c[(0, 1)] - c[(1, 0)]).abs() < 1e-15);
    }
}
