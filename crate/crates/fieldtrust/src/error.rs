use thiserror::Error;

/// Errors surfaced by discretization, inference, and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh dimension must be 1 or 2, got {0}")]
    BadDimension(usize),

    #[error("axis {axis}: need at least 3 nodes per axis to have an interior, got {nodes}")]
    TooFewNodes { axis: usize, nodes: usize },

    #[error("axis {axis}: extent [{lo}, {hi}] is empty or reversed")]
    BadExtent { axis: usize, lo: f64, hi: f64 },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("operator is not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance")]
    NotSymmetric { asymmetry: f64 },

    #[error("operator is singular or indefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    SingularOperator { min_eigenvalue: f64 },

    #[error("inverse check failed: max |G L - I| = {deviation:.3e}")]
    InverseCheck { deviation: f64 },

    #[error("measurement location {index} is on or outside the domain boundary")]
    LocationOutsideDomain { index: usize },

    #[error("noise variance must be strictly positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("trust parameter beta must be strictly positive, got {0}")]
    NonPositiveBeta(f64),

    #[error("covariance factorization failed even with maximum jitter {max_jitter:.3e}")]
    FactorizationFailed { max_jitter: f64 },

    #[error("marginal data covariance is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteMarginal { min_eigenvalue: f64 },

    #[error(
        "scale-invariant trust prior needs more than 2 interior nodes, got {n}; \
         the implied optimum is degenerate at or below that dimension"
    )]
    TrustPriorNeedsDimension { n: usize },

    #[error("trust inference needs at least one observation")]
    NoObservations,

    #[error(
        "joint inference of source and trust is not supported: the posterior is \
         non-Gaussian in the pair and has no closed-form update; fix the source \
         and infer trust, or fix trust and update the field"
    )]
    JointSourceTrustInference,

    #[error("trust solver failed to converge: {0}")]
    SolverFailed(String),

    #[error("sweep member c = {scale} did not converge: {reason}")]
    SweepMemberFailed { scale: f64, reason: String },

    #[error("convergence study designs must be nested: design {index} is not contained in design {0}", index + 1)]
    NonNestedDesigns { index: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
