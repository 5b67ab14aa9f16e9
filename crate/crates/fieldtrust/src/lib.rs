//! Physics-informed Gaussian field inference with model-trust estimation.
//!
//! A linear PDE on a rectangular domain, discretized with homogeneous
//! Dirichlet boundaries, induces a Gaussian prior over interior field
//! values: the quadratic energy of the equation is the prior potential,
//! and a trust parameter `beta` scales how strongly the field is held to
//! the physics. Point observations with Gaussian noise then give an exact
//! conjugate posterior, and the marginal likelihood of `beta` has a
//! closed-form gradient and Hessian (differences of expected energies and
//! their variances). Minimizing that potential measures how much the data
//! trust the model: a finite estimate exposes model-form error, while a
//! diverging one means the physics already explain the data.
//!
//! The pieces:
//!
//! * [`mesh`], [`operator`]: interior-node grids, Laplacians, Green
//!   operators, energy functionals.
//! * [`measure`], [`posterior`]: Gaussian field measures, physics priors,
//!   conjugate updates, partition functions, marginal potentials.
//! * [`potential`], [`trust`]: the trust-parameter calculus, solvers,
//!   sweeps, and convergence studies.
//! * [`oracle`]: Monte Carlo and finite-difference cross-checks for every
//!   closed form above.
//! * [`measurement`], [`design`], [`config`], [`driver`]: observation
//!   operators, sampling designs, and the batch experiment pipeline behind
//!   the `fieldtrust` binary (`infer`, `sweep`, `verify`).
//!
//! The `examples/` directory walks through each capability end to end.

pub mod config;
pub mod design;
pub mod driver;
pub mod error;
pub mod measure;
pub mod measurement;
pub mod mesh;
pub mod operator;
pub mod oracle;
pub mod posterior;
pub mod potential;
pub mod trust;

pub use error::{Error, Result};
pub use measure::{GaussianFieldMeasure, ParameterState, TrustPrior};
pub use measurement::{build_measurement, MeasurementSetup};
pub use mesh::{Mesh, SourceField};
pub use operator::Discretization;
pub use posterior::{marginal_neg_log_posterior, physics_prior, posterior_update};
pub use potential::{PotentialCalculusReport, WellPosedness};
pub use trust::{solve_trust, SolverOptions, TrustReport};
