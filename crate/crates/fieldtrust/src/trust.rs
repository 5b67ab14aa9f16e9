//! Estimating the trust parameter from data.
//!
//! At a stationary point the gradient identity pins the trust parameter to
//! the ratio between degrees of freedom and the energy the data force on
//! the field. A damped fixed-point iteration on the inverse trust value
//! exploits that structure; a gradient bisection over a wide bracket backs
//! it up. A run where the model explains the data sends the trust value to
//! infinity, and the solver reports that as divergence rather than failure.

use crate::error::{Error, Result};
use crate::measure::{ParameterState, TrustPrior};
use crate::measurement::{build_measurement, MeasurementSetup};
use crate::mesh::SourceField;
use crate::operator::Discretization;
use crate::potential::{centered_posterior, refine_root, report, WellPosedness};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Under-relaxation weight on the fixed-point update.
    pub damping: f64,
    /// Relative step tolerance on the inverse trust value.
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Search interval for the bisection fallback.
    pub bracket: (f64, f64),
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            rel_tol: 1e-10,
            max_iterations: 200,
            bracket: (1e-6, 1e6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FixedPoint,
    Bisection,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrustReport {
    /// Estimated trust value; `None` when the iteration diverged.
    pub beta_hat: Option<f64>,
    /// The data are explained by the model: the trust value grew without
    /// bound and the posterior pinned itself to the physics prior.
    pub diverged: bool,
    pub iterations: usize,
    /// `|grad|` of the trust potential at the estimate (0 when diverged).
    pub grad_residual: f64,
    /// Informativeness margin at the estimate.
    pub margin: Option<f64>,
    pub method: SolveMethod,
    /// Shape of the potential over a trust grid; filled in by drivers that
    /// scan one, left empty by the bare solver.
    pub verdict: Option<WellPosedness>,
    /// Trust value after each iteration, for diagnosing slow runs.
    pub beta_trace: Vec<f64>,
}

/// Stationarity data at one inverse trust value.
struct FixedPointStep {
    rhs: f64,
    quad: f64,
}

fn fixed_point_step(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    x: f64,
) -> Result<Option<FixedPointStep>> {
    let beta = 1.0 / x;
    let post = centered_posterior(disc, q, setup, beta)?;
    let quad = post.mean.dot(&(disc.energy_form() * &post.mean));
    // n - beta tr(L S) equals tr(S R' noise^-1 R), computed in the stable form
    let info = setup.information_matrix();
    let dof = (&post.cov * &info).trace();
    let denom = match prior {
        TrustPrior::Flat => dof,
        TrustPrior::Jeffreys => dof - 2.0,
        TrustPrior::Gaussian { .. } => return Ok(None),
    };
    if denom <= 1e-12 {
        return Ok(None);
    }
    Ok(Some(FixedPointStep {
        rhs: quad / denom,
        quad,
    }))
}

/// Estimate the trust value by minimizing its marginal potential.
pub fn solve_trust(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    opts: &SolverOptions,
) -> Result<TrustReport> {
    if setup.is_empty() {
        return Err(Error::NoObservations);
    }
    if matches!(prior, TrustPrior::Jeffreys) && disc.n() <= 2 {
        return Err(Error::TrustPriorNeedsDimension { n: disc.n() });
    }
    let gq = disc.mean_field(q);
    let energy_scale = disc.mesh().pair(q.values(), &gq).abs().max(1.0);

    let mut x = 1.0;
    let mut trace = Vec::with_capacity(opts.max_iterations);
    for iter in 1..=opts.max_iterations {
        let step = match fixed_point_step(disc, q, setup, prior, x)? {
            Some(step) => step,
            None => return bisect_trust(disc, q, setup, prior, opts, energy_scale, trace),
        };
        let x_new = (1.0 - opts.damping) * x + opts.damping * step.rhs;
        trace.push(1.0 / x_new);
        if x_new < 1e-12 && step.quad < 1e-10 * energy_scale {
            return Ok(diverged_report(iter, SolveMethod::FixedPoint, trace));
        }
        if (x_new - x).abs() <= opts.rel_tol * x_new.abs() {
            return finish(
                disc,
                q,
                setup,
                prior,
                1.0 / x_new,
                iter,
                trace,
                SolveMethod::FixedPoint,
                opts,
                energy_scale,
            );
        }
        x = x_new;
    }
    // no fixed point within budget: fall back to the bracketed gradient root
    bisect_trust(disc, q, setup, prior, opts, energy_scale, trace)
}

fn diverged_report(iterations: usize, method: SolveMethod, trace: Vec<f64>) -> TrustReport {
    TrustReport {
        beta_hat: None,
        diverged: true,
        iterations,
        grad_residual: 0.0,
        margin: None,
        method,
        verdict: None,
        beta_trace: trace,
    }
}

/// A trust value past the trusted bracket with negligible mismatch energy is
/// the signature of a run heading to infinite trust: the potential keeps
/// decreasing, but there is nothing left for it to balance against. The
/// plateau before that regime can stall the fixed point within its step
/// tolerance, so the iterate alone is not proof of a root.
fn runaway(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    beta: f64,
    bracket_hi: f64,
    energy_scale: f64,
) -> Result<bool> {
    if beta <= bracket_hi {
        return Ok(false);
    }
    let post = centered_posterior(disc, q, setup, beta)?;
    let quad = post.mean.dot(&(disc.energy_form() * &post.mean));
    Ok(quad < 1e-10 * energy_scale)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    mut beta: f64,
    iterations: usize,
    mut trace: Vec<f64>,
    method: SolveMethod,
    opts: &SolverOptions,
    energy_scale: f64,
) -> Result<TrustReport> {
    let n = disc.n() as f64;
    if runaway(disc, q, setup, beta, opts.bracket.1, energy_scale)? {
        return Ok(diverged_report(iterations, method, trace));
    }
    // safeguarded Newton polish on the gradient
    for _ in 0..40 {
        let state = ParameterState::new(beta)?;
        let rep = report(disc, q, setup, &state, prior)?;
        if rep.grad.abs() <= 1e-8 * (0.5 * n / beta) {
            break;
        }
        if rep.hessian <= 0.0 {
            break;
        }
        let mut step = rep.grad / rep.hessian;
        let max_step = 0.5 * beta;
        step = step.clamp(-max_step, max_step);
        beta -= step;
        trace.push(beta);
        if runaway(disc, q, setup, beta, opts.bracket.1, energy_scale)? {
            return Ok(diverged_report(iterations, method, trace));
        }
    }
    let state = ParameterState::new(beta)?;
    let rep = report(disc, q, setup, &state, prior)?;
    Ok(TrustReport {
        beta_hat: Some(beta),
        diverged: false,
        iterations,
        grad_residual: rep.grad.abs(),
        margin: Some(rep.informativeness_margin),
        method,
        verdict: None,
        beta_trace: trace,
    })
}

fn bisect_trust(
    disc: &Discretization,
    q: &SourceField,
    setup: &MeasurementSetup,
    prior: &TrustPrior,
    opts: &SolverOptions,
    energy_scale: f64,
    mut trace: Vec<f64>,
) -> Result<TrustReport> {
    let (lo, hi) = opts.bracket;
    let points = 121;
    let mut grid = Vec::with_capacity(points);
    let mut grads = Vec::with_capacity(points);
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let beta = lo * (hi / lo).powf(t);
        let state = ParameterState::new(beta)?;
        grid.push(beta);
        grads.push(report(disc, q, setup, &state, prior)?.grad);
    }
    let iterations = trace.len();
    for i in 0..points - 1 {
        if grads[i] < 0.0 && grads[i + 1] >= 0.0 {
            let beta = refine_root(disc, q, setup, prior, grid[i], grid[i + 1])?;
            trace.push(beta);
            return finish(
                disc,
                q,
                setup,
                prior,
                beta,
                iterations + 1,
                trace,
                SolveMethod::Bisection,
                opts,
                energy_scale,
            );
        }
    }
    if grads.iter().all(|&g| g < 0.0) {
        // potential still decreasing at the upper end of the bracket
        return Ok(diverged_report(iterations, SolveMethod::Bisection, trace));
    }
    Err(Error::SolverFailed(format!(
        "no descending-to-ascending gradient crossing in [{lo:.1e}, {hi:.1e}]"
    )))
}

/// Closed-form trust value in the dense-data, small-noise limit, where the
/// posterior mean is pinned to the truth and only the model mismatch
/// energy survives.
#[derive(Debug, Clone, Serialize)]
pub struct TrustLimit {
    pub beta_star: Option<f64>,
    pub diverged: bool,
    /// Energy of the discrepancy field, `1/2 psi' (W L) psi`.
    pub mismatch_energy: f64,
}

pub fn limit_trust(
    disc: &Discretization,
    q_model: &SourceField,
    q_truth: &SourceField,
    prior: &TrustPrior,
) -> Result<TrustLimit> {
    let n = disc.n() as f64;
    let psi = disc.mean_field(q_truth) - disc.mean_field(q_model);
    let e = psi.dot(&(disc.energy_form() * &psi));
    let numerator = match prior {
        TrustPrior::Flat => n,
        TrustPrior::Jeffreys => {
            if disc.n() <= 2 {
                return Err(Error::TrustPriorNeedsDimension { n: disc.n() });
            }
            n - 2.0
        }
        TrustPrior::Gaussian { .. } => {
            return Err(Error::SolverFailed(
                "no closed-form data limit under a gaussian trust prior".into(),
            ))
        }
    };
    if e <= 1e-14 * n {
        return Ok(TrustLimit {
            beta_star: None,
            diverged: true,
            mismatch_energy: 0.5 * e,
        });
    }
    Ok(TrustLimit {
        beta_star: Some(numerator / e),
        diverged: false,
        mismatch_energy: 0.5 * e,
    })
}

/// Curvature of the trust potential at the dense-data optimum,
/// `(n - 1) / (2 beta*^2)`.
pub fn limit_curvature(n: usize, beta_star: f64) -> f64 {
    0.5 * (n as f64 - 1.0) / (beta_star * beta_star)
}

/// One member of a model-error sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub scale: f64,
    pub beta_hat: Option<f64>,
    pub diverged: bool,
    /// Dense-data closed form for the same mismatch.
    pub limit_beta: Option<f64>,
    pub mismatch_energy: f64,
    pub grad_residual: f64,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Estimated trust never increases as the mismatch scale grows.
    pub monotone_nonincreasing: bool,
    /// `beta_hat[i + 1] / beta_hat[i]` over consecutive converged rows.
    pub scaling_ratios: Vec<f64>,
}

/// Re-estimate trust while scaling a controlled model discrepancy.
///
/// Truth fields are `G q_model + c * G (q_truth - q_model)`; every member
/// observes with the same noise sample so only the discrepancy varies.
#[allow(clippy::too_many_arguments)]
pub fn model_error_sweep(
    disc: &Discretization,
    q_model: &SourceField,
    q_truth: &SourceField,
    scales: &[f64],
    locations: &[Vec<f64>],
    noise_sigma: f64,
    prior: &TrustPrior,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SweepReport> {
    if scales.is_empty() {
        return Err(Error::Empty("sweep scales"));
    }
    let base = build_measurement(disc.mesh(), locations, noise_sigma)?;
    let psi0 = disc.mean_field(q_truth) - disc.mean_field(q_model);
    let phi_model = disc.mean_field(q_model);
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let truth = &phi_model + &psi0 * scale;
        let setup = base.clone().observe(&truth, seed)?;
        let solved = solve_trust(disc, q_model, &setup, prior, opts)
            .map_err(|e| Error::SweepMemberFailed {
                scale,
                reason: e.to_string(),
            })?;
        let q_scaled = SourceField::new(
            disc.mesh(),
            q_model.values() + (q_truth.values() - q_model.values()) * scale,
        )?;
        let limit = limit_trust(disc, q_model, &q_scaled, prior)?;
        rows.push(SweepRow {
            scale,
            beta_hat: solved.beta_hat,
            diverged: solved.diverged,
            limit_beta: limit.beta_star,
            mismatch_energy: limit.mismatch_energy,
            grad_residual: solved.grad_residual,
            margin: solved.margin,
        });
    }
    let converged: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.beta_hat.map(|b| (r.scale, b)))
        .collect();
    let mut ratios = Vec::new();
    for pair in converged.windows(2) {
        ratios.push(pair[1].1 / pair[0].1);
    }
    // monotonicity is judged in scale order, whatever order the caller swept
    let mut by_scale = converged;
    by_scale.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut monotone = true;
    for pair in by_scale.windows(2) {
        if pair[1].1 > pair[0].1 * (1.0 + 1e-9) {
            monotone = false;
        }
    }
    Ok(SweepReport {
        rows,
        monotone_nonincreasing: monotone,
        scaling_ratios: ratios,
    })
}

/// One density level of a data-refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub points: usize,
    pub fill_distance: f64,
    /// `|| mean - truth ||` in the discrete field norm.
    pub mean_error: f64,
    /// `|| S^{1/2} ||` in the same norm: sqrt of the weighted covariance trace.
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of the mean error against fill distance.
    pub error_rate: f64,
    /// Log-log slope of the spread against fill distance.
    pub spread_rate: f64,
}

/// Posterior contraction under nested uniform designs of growing density.
///
/// The trust value stays fixed: the study isolates how the posterior mean
/// approaches the truth and how its spread decays with the fill distance.
pub fn convergence_study(
    disc: &Discretization,
    q_model: &SourceField,
    q_truth: &SourceField,
    beta: f64,
    densities: &[usize],
    noise_sigma: f64,
    seed: u64,
) -> Result<ConvergenceReport> {
    if densities.len() < 2 {
        return Err(Error::Empty("density ladder"));
    }
    let extents = disc.mesh().extents().to_vec();
    let designs: Vec<Vec<Vec<f64>>> = densities
        .iter()
        .map(|&k| crate::design::uniform_nested_design(&extents, k))
        .collect::<Result<_>>()?;
    for i in 0..designs.len() - 1 {
        let fine = &designs[i + 1];
        let nested = designs[i].iter().all(|p| {
            fine.iter().any(|qp| {
                p.iter()
                    .zip(qp)
                    .all(|(a, b)| (a - b).abs() <= 1e-12)
            })
        });
        if !nested {
            return Err(Error::NonNestedDesigns { index: i + 1 });
        }
    }
    let truth = disc.mean_field(q_truth);
    let phi_model = disc.mean_field(q_model);
    let w = disc.mesh().cell_weight();
    let mut rows = Vec::with_capacity(designs.len());
    for design in &designs {
        let setup = build_measurement(disc.mesh(), design, noise_sigma)?
            .observe(&truth, seed)?;
        let post = centered_posterior(disc, q_model, &setup, beta)?;
        let mean = &phi_model + &post.mean;
        let err = &mean - &truth;
        let metrics = crate::design::design_metrics(&extents, design)?;
        rows.push(ConvergenceRow {
            points: design.len(),
            fill_distance: metrics.fill_distance,
            mean_error: (w * err.dot(&err)).sqrt(),
            spread: (w * post.cov.trace()).sqrt(),
        });
    }
    let error_rate = log_log_slope(rows.iter().map(|r| (r.fill_distance, r.mean_error)));
    let spread_rate = log_log_slope(rows.iter().map(|r| (r.fill_distance, r.spread)));
    Ok(ConvergenceReport {
        rows,
        error_rate,
        spread_rate,
    })
}

fn log_log_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Joint recovery of the source and the trust value from one data set is
/// not identifiable in this model family: rescaling the trust can be
/// traded against re-centering the source without changing the evidence.
/// The API exists so callers get a typed refusal instead of a footgun.
pub fn solve_joint_trust_and_source(
    _disc: &Discretization,
    _setup: &MeasurementSetup,
) -> Result<(SourceField, TrustReport)> {
    Err(Error::JointSourceTrustInference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::potential::grad_param_potential;

    fn mismatch_setup(
        nodes: usize,
        sigma: f64,
        seed: u64,
    ) -> (Discretization, SourceField, MeasurementSetup) {
        let mesh = Mesh::unit_interval(nodes).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| 4.0 * x[0]);
        let q_wrong = SourceField::from_fn(&mesh, |x| {
            4.0 * x[0] + 5.0 * (std::f64::consts::PI * x[0]).sin()
        });
        let truth = disc.mean_field(&q_wrong);
        let locs: Vec<Vec<f64>> = (1..12).map(|i| vec![i as f64 / 12.0]).collect();
        let setup = build_measurement(&mesh, &locs, sigma)
            .unwrap()
            .observe(&truth, seed)
            .unwrap();
        (disc, q, setup)
    }

    #[test]
    fn mismatch_run_converges_to_a_gradient_root() {
        let (disc, q, setup) = mismatch_setup(20, 0.02, 7);
        let report = solve_trust(&disc, &q, &setup, &TrustPrior::Flat, &SolverOptions::default())
            .unwrap();
        assert!(!report.diverged);
        let beta = report.beta_hat.unwrap();
        assert!(beta > 0.0 && beta.is_finite());
        assert!(report.grad_residual <= 1e-8 * 0.5 * disc.n() as f64 / beta);
        assert!(report.margin.unwrap() > 0.0);
        assert_eq!(report.method, SolveMethod::FixedPoint);
        assert!(!report.beta_trace.is_empty());
    }

    #[test]
    fn jeffreys_root_sits_below_the_flat_root() {
        // the jeffreys slope 1/beta pushes the optimum toward smaller trust
        let (disc, q, setup) = mismatch_setup(20, 0.02, 7);
        let opts = SolverOptions::default();
        let flat = solve_trust(&disc, &q, &setup, &TrustPrior::Flat, &opts).unwrap();
        let jeff = solve_trust(&disc, &q, &setup, &TrustPrior::Jeffreys, &opts).unwrap();
        assert!(jeff.beta_hat.unwrap() < flat.beta_hat.unwrap());
    }

    #[test]
    fn noiseless_consistent_data_diverges() {
        let mesh = Mesh::unit_interval(16).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| 1.0 + x[0]);
        let truth = disc.mean_field(&q);
        let locs: Vec<Vec<f64>> = (1..8).map(|i| vec![i as f64 / 8.0]).collect();
        let setup = build_measurement(&mesh, &locs, 0.05)
            .unwrap()
            .with_data(setup_data(&mesh, &locs, &truth))
            .unwrap();
        let report =
            solve_trust(&disc, &q, &setup, &TrustPrior::Flat, &SolverOptions::default()).unwrap();
        assert!(report.diverged);
        assert!(report.beta_hat.is_none());
        // the trace must show the runaway growth
        assert!(*report.beta_trace.last().unwrap() > 1e11);
    }

    fn setup_data(
        mesh: &Mesh,
        locs: &[Vec<f64>],
        truth: &nalgebra::DVector<f64>,
    ) -> nalgebra::DVector<f64> {
        let setup = build_measurement(mesh, locs, 1.0).unwrap();
        setup.matrix() * truth
    }

    #[test]
    fn gaussian_trust_prior_goes_through_bisection() {
        let (disc, q, setup) = mismatch_setup(14, 0.05, 3);
        let prior = TrustPrior::Gaussian {
            mean: 1.5,
            variance: 0.5,
        };
        let report = solve_trust(&disc, &q, &setup, &prior, &SolverOptions::default()).unwrap();
        assert_eq!(report.method, SolveMethod::Bisection);
        let beta = report.beta_hat.unwrap();
        let g = grad_param_potential(
            &disc,
            &q,
            &setup,
            &ParameterState::new(beta).unwrap(),
            &prior,
        )
        .unwrap();
        assert!(g.abs() <= 1e-8 * 0.5 * disc.n() as f64 / beta);
    }

    #[test]
    fn small_problems_reject_the_jeffreys_prior() {
        let mesh = Mesh::unit_interval(4).unwrap(); // two interior nodes
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::zero(&mesh);
        let truth = disc.mean_field(&q);
        let setup = build_measurement(&mesh, &[vec![0.34]], 0.1)
            .unwrap()
            .observe(&truth, 1)
            .unwrap();
        let err = solve_trust(
            &disc,
            &q,
            &setup,
            &TrustPrior::Jeffreys,
            &SolverOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TrustPriorNeedsDimension { n: 2 }));
    }

    #[test]
    fn empty_setup_is_rejected() {
        let mesh = Mesh::unit_interval(8).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::zero(&mesh);
        let setup = build_measurement(&mesh, &[], 0.1).unwrap();
        let err = solve_trust(
            &disc,
            &q,
            &setup,
            &TrustPrior::Flat,
            &SolverOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoObservations));
    }

    #[test]
    fn limit_trust_matches_the_closed_form() {
        let mesh = Mesh::unit_interval(24).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| x[0]);
        let q2 = SourceField::from_fn(&mesh, |x| x[0] + (2.0 * x[0]).cos());
        let limit = limit_trust(&disc, &q, &q2, &TrustPrior::Flat).unwrap();
        let psi = disc.mean_field(&q2) - disc.mean_field(&q);
        let e = psi.dot(&(disc.energy_form() * &psi));
        let expected = disc.n() as f64 / e;
        assert!((limit.beta_star.unwrap() - expected).abs() <= 1e-12 * expected);
        let jeff = limit_trust(&disc, &q, &q2, &TrustPrior::Jeffreys).unwrap();
        assert!((jeff.beta_star.unwrap() - (disc.n() as f64 - 2.0) / e).abs() <= 1e-12 * expected);

        let same = limit_trust(&disc, &q, &q, &TrustPrior::Flat).unwrap();
        assert!(same.diverged);
        assert!(same.beta_star.is_none());
        assert_eq!(same.mismatch_energy, 0.0);
    }

    #[test]
    fn sweep_decreases_and_tracks_the_inverse_square_law() {
        let mesh = Mesh::unit_interval(20).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::from_fn(&mesh, |x| 4.0 * x[0]);
        let q_wrong = SourceField::from_fn(&mesh, |x| {
            4.0 * x[0] + (std::f64::consts::PI * x[0]).sin()
        });
        let locs: Vec<Vec<f64>> = (1..16).map(|i| vec![i as f64 / 16.0]).collect();
        let report = model_error_sweep(
            &disc,
            &q,
            &q_wrong,
            &[4.0, 8.0, 16.0],
            &locs,
            0.001,
            &TrustPrior::Flat,
            &SolverOptions::default(),
            11,
        )
        .unwrap();
        assert!(report.monotone_nonincreasing);
        assert_eq!(report.rows.len(), 3);
        // strong mismatch: estimates approach the dense-data law, so each
        // doubling of the scale divides the trust value by about four
        for ratio in &report.scaling_ratios {
            assert!(
                (ratio - 0.25).abs() < 0.08,
                "ratio {ratio} far from 1/4"
            );
        }
        for row in &report.rows {
            let (Some(b), Some(l)) = (row.beta_hat, row.limit_beta) else {
                panic!("sweep member did not converge");
            };
            assert!((b - l).abs() <= 0.35 * l, "beta {b} vs limit {l}");
        }
    }

    #[test]
    fn refinement_contracts_the_posterior() {
        let mesh = Mesh::unit_interval(127).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        // zero model source so the posterior has to learn the whole field
        // from data; otherwise the prior mean already matches the truth and
        // the error has no room to shrink
        let q_model = SourceField::zero(&mesh);
        let q = SourceField::from_fn(&mesh, |x| (std::f64::consts::PI * x[0]).sin());
        let report = convergence_study(&disc, &q_model, &q, 1.0, &[4, 8, 16, 32], 1e-8, 5).unwrap();
        assert_eq!(report.rows.len(), 4);
        for pair in report.rows.windows(2) {
            assert!(pair[1].fill_distance < pair[0].fill_distance);
            assert!(pair[1].mean_error < pair[0].mean_error);
            assert!(pair[1].spread < pair[0].spread);
        }
        assert!(
            report.error_rate > 1.0,
            "error rate {} too shallow",
            report.error_rate
        );
        assert!(report.spread_rate > 0.4, "spread rate {}", report.spread_rate);
    }

    #[test]
    fn non_nested_ladder_is_rejected() {
        let mesh = Mesh::unit_interval(31).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let q = SourceField::zero(&mesh);
        let err = convergence_study(&disc, &q, &q, 1.0, &[4, 6], 1e-6, 5).unwrap_err();
        assert!(matches!(err, Error::NonNestedDesigns { index: 1 }));
    }

    #[test]
    fn joint_inference_is_refused() {
        let mesh = Mesh::unit_interval(8).unwrap();
        let disc = Discretization::poisson(mesh.clone()).unwrap();
        let setup = build_measurement(&mesh, &[vec![0.5]], 0.1).unwrap();
        let err = solve_joint_trust_and_source(&disc, &setup).unwrap_err();
        assert!(matches!(err, Error::JointSourceTrustInference));
    }
}
