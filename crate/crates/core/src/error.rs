use thiserror::Error;

/// Errors raised by the embedding solvers and their supporting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("geometry lengths must be positive (a = {a}, b = {b})")]
    NonPositiveGeometry { a: f64, b: f64 },

    #[error("invalid quadrature interval ({lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("point ({x}, {y}) lies outside the requested subdomain")]
    OutsideSubdomain { x: f64, y: f64 },

    #[error("kappa = {kappa} is at a Dirichlet resonance of the rectangle (Steklov mode n = {n})")]
    NearDirichletResonance { kappa: f64, n: usize },

    #[error(
        "kappa = {kappa} makes Steklov eigenvalue b_{n} vanish; the NtD operator is undefined"
    )]
    NearNeumannResonance { kappa: f64, n: usize },

    #[error("basis index {index} out of range 1..={size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("evaluation at the polar origin is singular")]
    SingularOrigin,

    #[error("trial function is identically zero")]
    ZeroTrial,

    #[error("metric matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    MetricNotPositiveDefinite { min_eigenvalue: f64 },

    #[error("no positive eigenvalue available to update kappa")]
    NoPositiveEigenvalue,

    #[error("fixed-point iteration did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("grid spacing {h} too coarse for the domain")]
    GridTooCoarse { h: f64 },

    #[error("iterative eigensolver stalled after {iterations} iterations")]
    IterationStalled { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o failure: {0}")]
    IoFailure(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::IoFailure(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
