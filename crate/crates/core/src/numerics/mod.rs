//! Numeric substrate: Gegenbauer polynomials, Gauss–Kronrod quadrature and
//! power-law analysis of integrands near the ends of an interval.

mod endpoint;
mod gegenbauer;
mod linalg;
pub(crate) mod quadrature;

pub use endpoint::{
    endpoint_exponent, Behavior, EndpointAnalysis, Side, Window, DEFAULT_SAMPLES, DEFAULT_WINDOW_FAR,
    DEFAULT_WINDOW_NEAR, FIT_TOLERANCE,
};
pub use gegenbauer::{
    gegenbauer_at_one, gegenbauer_eval, gegenbauer_ratio, gegenbauer_ratio_taylor, Order,
};
pub use quadrature::{
    integrate_adaptive, integrate_regular, Estimate, Integral, Integrand, DIVERGENCE_MARGIN,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("power-law fit failed near {endpoint}: {reason}")]
    FitFailure { endpoint: f64, reason: String },

    /// Neither a value within tolerance nor a confident divergence verdict.
    #[error("quadrature on [{a}, {b}] did not converge (estimate {estimate:e}, error {error:e})")]
    NonConvergence {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },
}
