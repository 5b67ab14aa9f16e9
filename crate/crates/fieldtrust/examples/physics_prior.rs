//! Build the physics-informed prior on an interval and show how the trust
//! parameter sharpens it around the source solution.

use fieldtrust::measure::ParameterState;
use fieldtrust::mesh::{Mesh, SourceField};
use fieldtrust::operator::Discretization;
use fieldtrust::posterior::physics_prior;
use fieldtrust::potential::prior_expected_energy;

fn main() -> Result<(), fieldtrust::Error> {
    let mesh = Mesh::new(&[(0.0, 1.0)], &[34])?;
    let disc = Discretization::poisson(mesh)?;
    // box source in the middle of the domain; the prior mean is its
    // Poisson solution with zero boundaries
    let q = SourceField::from_fn(disc.mesh(), |x| {
        if (x[0] - 0.5).abs() < 0.25 {
            1.0
        } else {
            0.0
        }
    });

    for beta in [0.5, 8.0] {
        let state = ParameterState::new(beta)?;
        let prior = physics_prior(&disc, &q, &state)?;
        println!("trust beta = {beta}");
        println!(
            "  expected physics energy under the prior: {:.4} (= n / (2 beta))",
            prior_expected_energy(&disc, &state)
        );
        println!("      x      mean       std");
        for i in (0..disc.n()).step_by(8) {
            let x = disc.mesh().coord(i)[0];
            println!(
                "  {x:5.3}  {:9.5}  {:9.5}",
                prior.mean()[i],
                prior.covariance()[(i, i)].sqrt()
            );
        }
        println!();
    }
    println!("larger beta trusts the physics more: same mean, tighter spread");
    Ok(())
}
