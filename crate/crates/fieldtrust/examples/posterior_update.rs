//! Exact posterior update from noisy point observations.
//!
//! The assumed model is deliberately wrong about the source, so the prior
//! mean misses the truth; conditioning on a handful of measurements pulls
//! the field back toward it.

use fieldtrust::design::uniform_nested_design;
use fieldtrust::measure::ParameterState;
use fieldtrust::measurement::build_measurement;
use fieldtrust::mesh::{Mesh, SourceField};
use fieldtrust::operator::Discretization;
use fieldtrust::posterior::{physics_prior, posterior_update};
use std::f64::consts::PI;

fn main() -> Result<(), fieldtrust::Error> {
    let mesh = Mesh::new(&[(0.0, 1.0)], &[42])?;
    let disc = Discretization::poisson(mesh)?;
    let q_model = SourceField::from_fn(disc.mesh(), |x| 2.0 * x[0]);
    let q_truth =
        SourceField::from_fn(disc.mesh(), |x| 2.0 * x[0] + 6.0 * (PI * x[0]).sin());
    let truth = disc.mean_field(&q_truth);

    let locations = uniform_nested_design(disc.mesh().extents(), 8)?;
    let setup = build_measurement(disc.mesh(), &locations, 0.01)?.observe(&truth, 3)?;

    let state = ParameterState::new(1.0)?;
    let prior = physics_prior(&disc, &q_model, &state)?;
    let post = posterior_update(&prior, &setup)?;

    println!("{} observations, noise sigma 0.01", setup.len());
    println!("      x      truth   prior mean    post mean   post std");
    for i in (2..disc.n()).step_by(5) {
        let x = disc.mesh().coord(i)[0];
        println!(
            "  {x:5.3}  {:9.5}  {:11.5}  {:11.5}  {:9.2e}",
            truth[i],
            prior.mean()[i],
            post.mean()[i],
            post.covariance()[(i, i)].sqrt()
        );
    }

    let w = disc.mesh().cell_weight();
    let prior_err = truth.clone() - prior.mean();
    let post_err = truth - post.mean();
    println!(
        "\nfield-norm error: prior {:.4}, posterior {:.4}",
        (w * prior_err.dot(&prior_err)).sqrt(),
        (w * post_err.dot(&post_err)).sqrt()
    );
    Ok(())
}
