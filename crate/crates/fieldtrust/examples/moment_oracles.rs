//! Cross-check the closed-form Gaussian quadratic moments against the
//! independent oracles: Monte Carlo sampling and Richardson finite
//! differences. The same checks run over 100 random instances in
//! `fieldtrust verify`; this is one instance, spelled out.

use fieldtrust::measure::{GaussianFieldMeasure, ParameterState};
use fieldtrust::mesh::Mesh;
use fieldtrust::operator::Discretization;
use fieldtrust::oracle::{
    fd_derivative, mc_quadratic_mean, mc_quadratic_second_moment, quadratic_mean,
    quadratic_second_moment,
};
use fieldtrust::posterior::log_partition;
use fieldtrust::potential::prior_expected_energy;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), fieldtrust::Error> {
    let dim = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let m = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = (&b * b.transpose() + DMatrix::identity(dim, dim)) * 0.5;
    let measure = GaussianFieldMeasure::new(m.clone(), d.clone())?;

    // E[1/2 y'Ay] and E[(1/2 y'Ay)^2] for y ~ N(m, D)
    let mean_closed = quadratic_mean(&a, &m, &d);
    let second_closed = quadratic_second_moment(&a, &m, &d);
    let mean_mc = mc_quadratic_mean(&a, &measure, 200_000, 7);
    let second_mc = mc_quadratic_second_moment(&a, &measure, 200_000, 8);
    println!("quadratic-form moments, one random 5-dimensional instance:");
    println!(
        "  mean:          closed {mean_closed:+.6}, sampled {:+.6} +- {:.1e}  ({:.2} SE off)",
        mean_mc.value,
        mean_mc.std_error,
        mean_mc.deviation_in_se(mean_closed)
    );
    println!(
        "  second moment: closed {second_closed:+.6}, sampled {:+.6} +- {:.1e}  ({:.2} SE off)",
        second_mc.value,
        second_mc.std_error,
        second_mc.deviation_in_se(second_closed)
    );

    // the partition-function slope identity, checked by finite differences
    let disc = Discretization::poisson(Mesh::unit_interval(18)?)?;
    let beta = 1.5;
    let fd = fd_derivative(
        |b| -log_partition(disc.laplacian(), &ParameterState::new(b).unwrap()).unwrap(),
        beta,
        1,
    );
    let expected = prior_expected_energy(&disc, &ParameterState::new(beta)?);
    println!("\npartition slope at beta = {beta}:");
    println!(
        "  -d(log Z)/d(beta) = {:.10}  vs  n/(2 beta) = {:.10}  (diff {:.1e})",
        fd.value,
        expected,
        (fd.value - expected).abs()
    );
    Ok(())
}
