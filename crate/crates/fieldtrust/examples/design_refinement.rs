//! Posterior contraction under nested sampling designs.
//!
//! Doubling the design density shrinks both the error of the posterior
//! mean and the posterior spread; the log-log slopes against the fill
//! distance are the empirical convergence rates.

use fieldtrust::design::{design_metrics, uniform_nested_design};
use fieldtrust::mesh::{Mesh, SourceField};
use fieldtrust::operator::Discretization;
use fieldtrust::trust::convergence_study;
use std::f64::consts::PI;

fn main() -> Result<(), fieldtrust::Error> {
    let mesh = Mesh::new(&[(0.0, 1.0)], &[131])?;
    let disc = Discretization::poisson(mesh)?;
    let q_model = SourceField::zero(disc.mesh());
    let q_truth = SourceField::from_fn(disc.mesh(), |x| 5.0 * (PI * x[0]).sin());

    let densities = [8usize, 16, 32, 64];
    for &k in &densities {
        let design = uniform_nested_design(disc.mesh().extents(), k)?;
        let m = design_metrics(disc.mesh().extents(), &design)?;
        println!(
            "density {k:>3}: {:>2} points, fill {:.5}, separation {:.5}, mesh ratio {:.3}",
            design.len(),
            m.fill_distance,
            m.separation_radius.unwrap_or(f64::NAN),
            m.mesh_ratio.unwrap_or(f64::NAN)
        );
    }

    let study = convergence_study(&disc, &q_model, &q_truth, 1.0, &densities, 1e-6, 11)?;
    println!("\n  points   fill dist   mean error      spread");
    for row in &study.rows {
        println!(
            "  {:>6}  {:>10.5}  {:>11.4e}  {:>10.4e}",
            row.points, row.fill_distance, row.mean_error, row.spread
        );
    }
    println!(
        "\nlog-log rates vs fill distance: error {:.2}, spread {:.2}",
        study.error_rate, study.spread_rate
    );
    Ok(())
}
