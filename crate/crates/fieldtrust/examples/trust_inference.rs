//! Infer how much the data trust the assumed physics.
//!
//! Two runs on the same mesh: data from a wrong source give a finite trust
//! estimate that matches the dense-data closed form, and data the model
//! explains exactly drive the estimate to infinity (reported as
//! divergence, not as a number).

use fieldtrust::design::uniform_nested_design;
use fieldtrust::measure::TrustPrior;
use fieldtrust::measurement::build_measurement;
use fieldtrust::mesh::{Mesh, SourceField};
use fieldtrust::operator::Discretization;
use fieldtrust::potential::wellposedness_verdict;
use fieldtrust::trust::{limit_trust, solve_trust, SolverOptions};
use std::f64::consts::PI;

fn main() -> Result<(), fieldtrust::Error> {
    let mesh = Mesh::new(&[(0.0, 1.0)], &[48])?;
    let disc = Discretization::poisson(mesh)?;
    let q_model = SourceField::from_fn(disc.mesh(), |x| 3.0 * x[0]);
    let q_wrong =
        SourceField::from_fn(disc.mesh(), |x| 3.0 * x[0] + 10.0 * (2.0 * PI * x[0]).sin());

    let locations = uniform_nested_design(disc.mesh().extents(), 96)?;
    let base = build_measurement(disc.mesh(), &locations, 1e-3)?;
    let opts = SolverOptions::default();

    // model-form error present: finite trust
    let setup = base
        .clone()
        .observe(&disc.mean_field(&q_wrong), 11)?;
    let report = solve_trust(&disc, &q_model, &setup, &TrustPrior::Flat, &opts)?;
    let beta_hat = report.beta_hat.expect("mismatched data converge");
    println!(
        "wrong source:   beta_hat = {beta_hat:.4e}  ({} iterations, {:?}, residual {:.1e})",
        report.iterations, report.method, report.grad_residual
    );
    let limit = limit_trust(&disc, &q_model, &q_wrong, &TrustPrior::Flat)?;
    println!(
        "                dense-data limit n / (2 E_mismatch) = {:.4e}",
        limit.beta_star.expect("nonzero mismatch")
    );

    // the estimate is the unique minimum of the trust potential
    let grid: Vec<f64> = (0..61)
        .map(|i| 1e-3 * (1e6f64).powf(i as f64 / 60.0))
        .collect();
    let verdict = wellposedness_verdict(&disc, &q_model, &setup, &TrustPrior::Flat, &grid)?;
    println!("                potential shape over the grid: {verdict:?}");

    // correct model: nothing left for finite trust to explain
    let exact = {
        let data = base.matrix() * disc.mean_field(&q_model);
        base.with_data(data)?
    };
    let report = solve_trust(&disc, &q_model, &exact, &TrustPrior::Flat, &opts)?;
    println!(
        "correct source: diverged = {} after {} iterations (the model explains the data)",
        report.diverged, report.iterations
    );
    Ok(())
}
