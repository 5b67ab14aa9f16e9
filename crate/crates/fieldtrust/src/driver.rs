//! Batch experiment driver: turns a validated config into artifacts.
//!
//! Every run computes all of its outputs in memory first and only then
//! writes them, each through a temp-then-rename, so a failed run leaves no
//! partial files. With a fixed config and seed the artifacts are
//! bit-identical across runs.

use crate::config::{read_nodal_csv, resolve, DesignSpec, ExperimentConfig, TruthSpec};
use crate::design::{design_metrics, uniform_nested_design};
use crate::error::{Error, Result};
use crate::measure::{ParameterState, TrustPrior};
use crate::measurement::{build_measurement, read_measurement_csv, MeasurementSetup};
use crate::mesh::SourceField;
use crate::operator::Discretization;
use crate::oracle::{fd_derivative, mc_quadratic_mean, mc_quadratic_second_moment};
use crate::posterior::{log_partition, marginal_neg_log_posterior};
use crate::potential::{centered_posterior, grad_param_potential, hessian_param_potential, report, wellposedness_verdict};
use crate::trust::{convergence_study, model_error_sweep, solve_trust, TrustReport};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Map an error to the process exit code contract: 2 for configuration
/// and input problems, 3 for numerical or runtime failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Csv(_)
        | Error::BadDimension { .. }
        | Error::TooFewNodes { .. }
        | Error::BadExtent { .. }
        | Error::LengthMismatch { .. }
        | Error::LocationOutsideDomain { .. }
        | Error::NonPositiveNoise(_)
        | Error::NonPositiveBeta(_)
        | Error::TrustPriorNeedsDimension { .. }
        | Error::NoObservations
        | Error::JointSourceTrustInference
        | Error::NonNestedDesigns { .. }
        | Error::Empty(_) => 2,
        _ => 3,
    }
}

struct Problem {
    disc: Discretization,
    q: SourceField,
    /// Ground-truth field on the mesh, when the config pins one down.
    truth: Option<DVector<f64>>,
    setup: MeasurementSetup,
}

fn build_problem(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Problem> {
    let mesh = cfg.mesh.build()?;
    let disc = Discretization::poisson(mesh)?;
    let q = cfg.source.realize(disc.mesh(), base_dir)?;
    let truth = resolve_truth(cfg.truth.as_ref(), &disc, &q, base_dir)?;
    let sigma = cfg.measurement.noise_sigma;
    let setup = match &cfg.measurement.design {
        DesignSpec::Uniform { density } => {
            let locations = uniform_nested_design(disc.mesh().extents(), *density)?;
            let truth = truth.as_ref().ok_or_else(|| {
                Error::Config("a uniform design needs a truth field to sample from".into())
            })?;
            build_measurement(disc.mesh(), &locations, sigma)?.observe(truth, cfg.run.seed)?
        }
        DesignSpec::Csv { path } => {
            let (locations, data) =
                read_measurement_csv(&resolve(base_dir, path), disc.mesh().dim())?;
            build_measurement(disc.mesh(), &locations, sigma)?.with_data(data)?
        }
    };
    Ok(Problem {
        disc,
        q,
        truth,
        setup,
    })
}

/// Truth field per the config. `None` only when the data come from a CSV
/// and no truth section is given; a missing section otherwise means the
/// model is correct.
fn resolve_truth(
    spec: Option<&TruthSpec>,
    disc: &Discretization,
    q: &SourceField,
    base_dir: &Path,
) -> Result<Option<DVector<f64>>> {
    match spec {
        None => Ok(Some(disc.mean_field(q))),
        Some(t) => {
            if let Some(path) = &t.field_csv {
                let field = read_nodal_csv(&resolve(base_dir, path), disc.mesh(), "phi")?;
                return Ok(Some(field));
            }
            let q_truth = truth_source(Some(t), disc, q, base_dir)?;
            Ok(Some(disc.mean_field(&q_truth)))
        }
    }
}

/// Effective truth source `q + c (q_truth - q)`; the model source itself
/// when no truth is configured.
fn truth_source(
    spec: Option<&TruthSpec>,
    disc: &Discretization,
    q: &SourceField,
    base_dir: &Path,
) -> Result<SourceField> {
    let Some(t) = spec else {
        return Ok(q.clone());
    };
    if t.field_csv.is_some() {
        return Err(Error::Config(
            "this run needs truth as a source, not a raw field".into(),
        ));
    }
    let raw = t
        .source
        .as_ref()
        .ok_or_else(|| Error::Config("truth: missing source".into()))?
        .realize(disc.mesh(), base_dir)?;
    let c = t.mismatch_scale.unwrap_or(1.0);
    SourceField::new(
        disc.mesh(),
        q.values() + (raw.values() - q.values()) * c,
    )
}

struct Artifact {
    name: &'static str,
    bytes: Vec<u8>,
}

fn write_artifacts(out_dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for artifact in artifacts {
        let tmp = out_dir.join(format!(".{}.tmp", artifact.name));
        std::fs::write(&tmp, &artifact.bytes)?;
        std::fs::rename(&tmp, out_dir.join(artifact.name))?;
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::SolverFailed(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::SolverFailed(format!("csv buffer: {e}")))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Full trust-inference run: estimate, tabulate the potential over the
/// grid, classify its shape, and emit `trust_report.json`,
/// `posterior_grid.csv`, `fields.csv`.
pub fn run_infer(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<TrustReport> {
    let problem = build_problem(cfg, base_dir)?;
    let Problem {
        disc,
        q,
        truth,
        setup,
    } = &problem;

    let mut solved = solve_trust(disc, q, setup, &cfg.prior, &cfg.solver)?;

    let grid = cfg.run.beta_grid.values();
    let mut grid_rows = Vec::with_capacity(grid.len());
    for &beta in &grid {
        let state = ParameterState::new(beta)?;
        let rep = report(disc, q, setup, &state, &cfg.prior)?;
        let potential = marginal_neg_log_posterior(disc, q, setup, &state, &cfg.prior)?;
        grid_rows.push(vec![
            fmt(beta),
            fmt(potential),
            fmt(rep.grad),
            fmt(rep.hessian),
            fmt(rep.informativeness_margin),
        ]);
    }
    solved.verdict = Some(wellposedness_verdict(disc, q, setup, &cfg.prior, &grid)?);

    // posterior field at the estimate; at the last iterate when diverged,
    // where the field has already collapsed onto the physics prior mean
    let beta_field = solved
        .beta_hat
        .or_else(|| solved.beta_trace.last().copied())
        .unwrap_or(1.0);
    let post = centered_posterior(disc, q, setup, beta_field)?;
    let mean_shift = disc.mean_field(q);
    let dim = disc.mesh().dim();
    let mut header: Vec<&str> = if dim == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    };
    header.extend(["mean", "centered_mean", "post_var"]);
    if truth.is_some() {
        header.push("truth");
    }
    let mut field_rows = Vec::with_capacity(disc.n());
    for i in 0..disc.n() {
        let mut row: Vec<String> = disc.mesh().coord(i).iter().map(|&c| fmt(c)).collect();
        row.push(fmt(mean_shift[i] + post.mean[i]));
        row.push(fmt(post.mean[i]));
        row.push(fmt(post.cov[(i, i)]));
        if let Some(t) = truth {
            row.push(fmt(t[i]));
        }
        field_rows.push(row);
    }

    let artifacts = vec![
        Artifact {
            name: "trust_report.json",
            bytes: json_bytes(&solved)?,
        },
        Artifact {
            name: "posterior_grid.csv",
            bytes: csv_bytes(&["beta", "potential", "grad", "hessian", "margin"], &grid_rows)?,
        },
        Artifact {
            name: "fields.csv",
            bytes: csv_bytes(&header, &field_rows)?,
        },
    ];
    write_artifacts(out_dir, &artifacts)?;
    Ok(solved)
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummary {
    monotone_nonincreasing: bool,
    scaling_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ConvergenceSummary {
    error_rate: f64,
    spread_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
struct StudySummary {
    sweep: Option<SweepSummary>,
    convergence: Option<ConvergenceSummary>,
}

/// Model-error sweep and/or data-density study, per the config sections
/// present. Emits `sweep.csv`, `convergence.csv`, and `summary.json`.
pub fn run_sweep(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<()> {
    if cfg.sweep.is_none() && cfg.convergence.is_none() {
        return Err(Error::Config(
            "sweep run needs a [sweep] or [convergence] section".into(),
        ));
    }
    let mesh = cfg.mesh.build()?;
    let disc = Discretization::poisson(mesh)?;
    let q = cfg.source.realize(disc.mesh(), base_dir)?;
    let mut artifacts = Vec::new();
    let mut summary = StudySummary {
        sweep: None,
        convergence: None,
    };

    if let Some(spec) = &cfg.sweep {
        let q_truth = truth_source(cfg.truth.as_ref(), &disc, &q, base_dir)?;
        let locations = match &cfg.measurement.design {
            DesignSpec::Uniform { density } => {
                uniform_nested_design(disc.mesh().extents(), *density)?
            }
            DesignSpec::Csv { path } => {
                read_measurement_csv(&resolve(base_dir, path), disc.mesh().dim())?.0
            }
        };
        let metrics = design_metrics(disc.mesh().extents(), &locations)?;
        let sweep = model_error_sweep(
            &disc,
            &q,
            &q_truth,
            &spec.scales,
            &locations,
            cfg.measurement.noise_sigma,
            &cfg.prior,
            &cfg.solver,
            cfg.run.seed,
        )?;
        let rows: Vec<Vec<String>> = sweep
            .rows
            .iter()
            .map(|r| {
                vec![
                    fmt(r.scale),
                    locations.len().to_string(),
                    fmt(metrics.fill_distance),
                    fmt_opt(r.beta_hat),
                    r.diverged.to_string(),
                    fmt_opt(r.limit_beta),
                    fmt(r.mismatch_energy),
                    fmt(r.grad_residual),
                    fmt_opt(r.margin),
                ]
            })
            .collect();
        artifacts.push(Artifact {
            name: "sweep.csv",
            bytes: csv_bytes(
                &[
                    "scale",
                    "observations",
                    "fill_distance",
                    "beta_hat",
                    "diverged",
                    "limit_beta",
                    "mismatch_energy",
                    "grad_residual",
                    "margin",
                ],
                &rows,
            )?,
        });
        summary.sweep = Some(SweepSummary {
            monotone_nonincreasing: sweep.monotone_nonincreasing,
            scaling_ratios: sweep.scaling_ratios,
        });
    }

    if let Some(spec) = &cfg.convergence {
        let q_truth = truth_source(cfg.truth.as_ref(), &disc, &q, base_dir)?;
        let sigma = spec.noise_sigma.unwrap_or(cfg.measurement.noise_sigma);
        let study = convergence_study(
            &disc,
            &q,
            &q_truth,
            spec.beta,
            &spec.densities,
            sigma,
            cfg.run.seed,
        )?;
        let rows: Vec<Vec<String>> = study
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.points.to_string(),
                    fmt(r.fill_distance),
                    fmt(r.mean_error),
                    fmt(r.spread),
                ]
            })
            .collect();
        artifacts.push(Artifact {
            name: "convergence.csv",
            bytes: csv_bytes(&["points", "fill_distance", "mean_error", "spread"], &rows)?,
        });
        summary.convergence = Some(ConvergenceSummary {
            error_rate: study.error_rate,
            spread_rate: study.spread_rate,
        });
    }

    artifacts.push(Artifact {
        name: "summary.json",
        bytes: json_bytes(&summary)?,
    });
    write_artifacts(out_dir, &artifacts)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub passed: bool,
    /// Worst deviation seen, in the units of `tolerance`.
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<VerifyCheck>,
}

/// Cross-validation suite: sampling oracles against the closed-form
/// moments, finite differences against the closed-form derivatives, and
/// the partition-function slope identity. Writes `verify.json`.
pub fn run_verify(seed: u64, out_dir: &Path) -> Result<VerifyReport> {
    let checks = vec![
        sampling_mean_check(seed)?,
        sampling_second_moment_check(seed)?,
        gradient_fd_check(seed)?,
        hessian_fd_check(seed)?,
        partition_slope_check()?,
    ];
    let report = VerifyReport {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    write_artifacts(
        out_dir,
        &[Artifact {
            name: "verify.json",
            bytes: json_bytes(&report)?,
        }],
    )?;
    Ok(report)
}

/// Random symmetric form, mean, and covariance for the sampling checks.
fn random_instance(
    seed: u64,
    index: u64,
) -> Result<(DMatrix<f64>, crate::measure::GaussianFieldMeasure)> {
    const DIM: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(index + 1)));
    let mut a = DMatrix::<f64>::zeros(DIM, DIM);
    for i in 0..DIM {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let m = DVector::from_fn(DIM, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(DIM, DIM, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = (&b * b.transpose() + DMatrix::identity(DIM, DIM)) * 0.5;
    let measure = crate::measure::GaussianFieldMeasure::new(m, d)?;
    Ok((a, measure))
}

const INSTANCES: u64 = 100;
const REQUIRED_SUCCESSES: usize = 95;

fn sampling_mean_check(seed: u64) -> Result<VerifyCheck> {
    let mut successes = 0;
    let mut worst = 0.0f64;
    for i in 0..INSTANCES {
        let (a, measure) = random_instance(seed, i)?;
        let closed = crate::oracle::quadratic_mean(&a, measure.mean(), measure.covariance());
        let est = mc_quadratic_mean(&a, &measure, 100_000, seed.wrapping_add(7 * i + 1));
        let dev = est.deviation_in_se(closed);
        worst = worst.max(dev);
        if dev <= 3.0 {
            successes += 1;
        }
    }
    Ok(VerifyCheck {
        name: "quadratic_mean_sampling".into(),
        passed: successes >= REQUIRED_SUCCESSES,
        worst_deviation: worst,
        tolerance: 3.0,
        detail: format!("{successes}/{INSTANCES} instances within 3 standard errors"),
    })
}

fn sampling_second_moment_check(seed: u64) -> Result<VerifyCheck> {
    let mut successes = 0;
    let mut worst = 0.0f64;
    for i in 0..INSTANCES {
        let (a, measure) = random_instance(seed, i)?;
        let closed =
            crate::oracle::quadratic_second_moment(&a, measure.mean(), measure.covariance());
        let est =
            mc_quadratic_second_moment(&a, &measure, 200_000, seed.wrapping_add(13 * i + 5));
        let dev = est.deviation_in_se(closed);
        worst = worst.max(dev);
        if dev <= 3.0 {
            successes += 1;
        }
    }
    Ok(VerifyCheck {
        name: "quadratic_second_moment_sampling".into(),
        passed: successes >= REQUIRED_SUCCESSES,
        worst_deviation: worst,
        tolerance: 3.0,
        detail: format!("{successes}/{INSTANCES} instances within 3 standard errors"),
    })
}

/// Small mismatch problem reused by the finite-difference checks.
fn fd_problem(
    seed: u64,
) -> Result<(Discretization, SourceField, MeasurementSetup)> {
    let mesh = crate::mesh::Mesh::unit_interval(16)?;
    let disc = Discretization::poisson(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xfd));
    let q = SourceField::new(
        disc.mesh(),
        DVector::from_fn(disc.n(), |_, _| rng.sample::<f64, _>(StandardNormal)),
    )?;
    let q_truth = SourceField::new(
        disc.mesh(),
        q.values()
            + disc
                .mesh()
                .sample_fn(|x| 3.0 * (std::f64::consts::PI * x[0]).sin()),
    )?;
    let truth = disc.mean_field(&q_truth);
    let locations = uniform_nested_design(disc.mesh().extents(), 9)?;
    let setup = build_measurement(disc.mesh(), &locations, 0.05)?.observe(&truth, seed)?;
    Ok((disc, q, setup))
}

fn gradient_fd_check(seed: u64) -> Result<VerifyCheck> {
    let (disc, q, setup) = fd_problem(seed)?;
    let prior = TrustPrior::Flat;
    let mut worst = 0.0f64;
    let mut flagged = false;
    for beta in [0.5, 1.0, 2.0] {
        let state = ParameterState::new(beta)?;
        let closed = grad_param_potential(&disc, &q, &setup, &state, &prior)?;
        let fd = fd_derivative(
            |b| {
                marginal_neg_log_posterior(
                    &disc,
                    &q,
                    &setup,
                    &ParameterState::new(b).expect("positive beta"),
                    &prior,
                )
                .expect("marginal evaluation")
            },
            beta,
            1,
        );
        flagged |= fd.flagged;
        worst = worst.max((closed - fd.value).abs() / closed.abs().max(1e-12));
    }
    Ok(VerifyCheck {
        name: "evidence_gradient_identity".into(),
        passed: worst <= 1e-6 && !flagged,
        worst_deviation: worst,
        tolerance: 1e-6,
        detail: "closed-form trust gradient vs finite difference of the marginal".into(),
    })
}

fn hessian_fd_check(seed: u64) -> Result<VerifyCheck> {
    let (disc, q, setup) = fd_problem(seed)?;
    let prior = TrustPrior::Flat;
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        let state = ParameterState::new(beta)?;
        let closed = hessian_param_potential(&disc, &q, &setup, &state, &prior)?;
        let fd = fd_derivative(
            |b| {
                grad_param_potential(
                    &disc,
                    &q,
                    &setup,
                    &ParameterState::new(b).expect("positive beta"),
                    &prior,
                )
                .expect("gradient evaluation")
            },
            beta,
            1,
        );
        worst = worst.max((closed - fd.value).abs() / closed.abs().max(1e-12));
    }
    Ok(VerifyCheck {
        name: "evidence_hessian_identity".into(),
        passed: worst <= 1e-5,
        worst_deviation: worst,
        tolerance: 1e-5,
        detail: "closed-form trust curvature vs finite difference of the gradient".into(),
    })
}

fn partition_slope_check() -> Result<VerifyCheck> {
    let mut worst = 0.0f64;
    for nodes in [4usize, 16] {
        let mesh = crate::mesh::Mesh::unit_interval(nodes)?;
        let disc = Discretization::poisson(mesh)?;
        for beta in [0.5, 1.0, 2.0] {
            let expected = 0.5 * disc.n() as f64 / beta;
            let fd = fd_derivative(
                |b| {
                    -log_partition(disc.laplacian(), &ParameterState::new(b).expect("positive beta"))
                        .expect("partition evaluation")
                },
                beta,
                1,
            );
            worst = worst.max((fd.value - expected).abs() / expected);
        }
    }
    Ok(VerifyCheck {
        name: "partition_energy_slope".into(),
        passed: worst <= 1e-8,
        worst_deviation: worst,
        tolerance: 1e-8,
        detail: "minus the partition-function slope vs the prior expected energy".into(),
    })
}

/// Resolve an output directory argument, creating it as needed.
pub fn prepare_out_dir(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    Ok(out.to_path_buf())
}
