//! Synchronization criteria for isotropic stochastic flows.
//!
//! The distance `r_t` between two points moved by the same isotropic flow is a one-dimensional
//! diffusion. [`scalar_diffusion`] classifies such diffusions through their scale function and
//! speed measure; [`sphere_ibf`] and [`euclid_iouf`] build the distance diffusion for isotropic
//! Brownian flows on spheres and isotropic Ornstein–Uhlenbeck flows on `R^d`; [`montecarlo`]
//! simulates it.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix the scalar.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod euclid_iouf;
pub mod extended;
pub mod montecarlo;
pub mod numerics;
pub mod real;
pub mod scalar_diffusion;
pub mod sphere_ibf;

pub use error::{Error, Result};
pub use extended::Extended;
pub use real::Real;

pub type DiffusionSpec64 = scalar_diffusion::DiffusionSpec<f64>;
pub type DiffusionSpec32 = scalar_diffusion::DiffusionSpec<f32>;
pub type SyncVerdict64 = scalar_diffusion::SyncVerdict<f64>;
pub type SyncVerdict32 = scalar_diffusion::SyncVerdict<f32>;
pub type SphereModel64 = sphere_ibf::SphereModel<f64>;
pub type SphereModel32 = sphere_ibf::SphereModel<f32>;
pub type SphereReport64 = sphere_ibf::SphereReport<f64>;
pub type SphereReport32 = sphere_ibf::SphereReport<f32>;
pub type CovarianceModel64 = euclid_iouf::CovarianceModel<f64>;
pub type CovarianceModel32 = euclid_iouf::CovarianceModel<f32>;
pub type OUFlowModel64 = euclid_iouf::OUFlowModel<f64>;
pub type OUFlowModel32 = euclid_iouf::OUFlowModel<f32>;
pub type IoufReport64 = euclid_iouf::IoufReport<f64>;
pub type IoufReport32 = euclid_iouf::IoufReport<f32>;
pub type SimConfig64 = montecarlo::SimConfig<f64>;
pub type SimConfig32 = montecarlo::SimConfig<f32>;
pub type DistanceLawEstimate64 = montecarlo::DistanceLawEstimate<f64>;
pub type DistanceLawEstimate32 = montecarlo::DistanceLawEstimate<f32>;
