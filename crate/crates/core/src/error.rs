use thiserror::Error;

/// Failure modes of the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate frequency: omega^2 = {0:e} is below the floor")]
    DegenerateFrequency(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("orbit did not close within t = {0}")]
    OpenOrbit(f64),
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("angle origin jumped by {jump:.3e} rad ({context})")]
    ConventionMismatch { jump: f64, context: String },
    #[error("diagonal element requested from an off-diagonal formula (m = n = {0})")]
    DegenerateDenominator(i64),
    #[error("extrapolation did not converge: estimates differ by {spread:.3e} (tolerance {tolerance:.1e})")]
    NoConvergence { spread: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
