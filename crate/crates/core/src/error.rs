use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),

    /// A diffusion specification violates one of its validation checks.
    #[error("invalid diffusion spec: {0}")]
    InvalidSpec(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The induced distance diffusion has a vanishing diffusion coefficient.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inconclusive classification: {0}")]
    Inconclusive(String),

    /// Two independent computations of the same quantity disagree.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("step size rejected at r = {r:e}: |drift|*dt = {excess:e} (dt = {dt:e})")]
    StepRejected { r: f64, excess: f64, dt: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
