use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice has more than {cap} points below horizon {horizon}")]
    LatticeTooLarge { cap: usize, horizon: f64 },

    #[error("lattice point missing for offset {0} (merge tolerance too small?)")]
    MissingLatticePoint(f64),

    #[error("fourier quadrature did not converge: estimated error {estimate:e} with {points} samples")]
    QuadratureNotConverged { estimate: f64, points: usize },

    #[error("delay {delay} rounds to zero cells at step {step}")]
    DelayBelowStep { delay: f64, step: f64 },

    #[error("trajectory blew up at t = {0}")]
    BlowUp(f64),

    #[error("exact backend needs {needed} memo entries, cap is {cap}")]
    MemoTooLarge { needed: usize, cap: usize },

    #[error("kernel horizon {have} is shorter than the required {need}")]
    HorizonExceeded { have: f64, need: f64 },

    #[error("truncated operator is numerically singular (sigma_min = {0:e})")]
    Singular(f64),

    #[error("Re(p) = {re} does not exceed the kernel growth rate {gamma} by the required margin")]
    GrowthMargin { re: f64, gamma: f64 },

    #[error("series tail did not fall below {tol:e} within {terms} terms")]
    TailNotConverged { terms: usize, tol: f64 },

    #[error("system has non-constant coefficients")]
    NonConstant,

    #[error("system is not stable (monodromy spectral radius {0})")]
    Unstable(f64),

    #[error("kernel atoms accumulate at the diagonal (gap_min = {0})")]
    AtomsAccumulate(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
