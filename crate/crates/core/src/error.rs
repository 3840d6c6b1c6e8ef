use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree {0}: expected N >= 2")]
    InvalidDegree(i64),
    #[error("Blaschke product is not normalized: |b(1) - 1| = {0:e}")]
    Normalization(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("improper potential: L(1) vanishes near x = {x}")]
    ImproperPotential { x: f64 },
    #[error("potential is not full: minimum {min:e} at x = {x}")]
    NotFull { min: f64, x: f64 },
    #[error("cannot normalize filter: fiber sum vanishes near x = {x}")]
    CannotNormalize { x: f64 },
    #[error("no scaling function: {0}")]
    NoScalingFunction(String),
    #[error("degenerate fiber over x = {x}: all branch weights vanish")]
    DegenerateFiber { x: f64 },
    #[error("kernel key outside the patch window: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
