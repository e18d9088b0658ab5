//! Seeded Euler–Maruyama simulation of distance diffusions and the estimators built on it.
//!
//! Path `i` draws from the ChaCha8 stream `i` of `seed`, so results do not depend on how paths
//! are distributed over threads.

mod engine;
mod estimators;

pub use engine::{simulate_distance_paths, PathSet};
pub use estimators::{
    estimate_sync_probability, estimate_top_lyapunov, stability_profile, wilson_interval, DistanceLawEstimate,
    LyapunovEstimate, ProfileRow, StabilityProfile, WILSON_Z,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scalar_diffusion::DiffusionSpec;

/// Default absorption floor relative to the interval scale.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Default log-coordinate threshold relative to the interval scale.
pub const DEFAULT_SWITCH: f64 = 0.05;
/// Default gap kept below a finite `R`.
pub const DEFAULT_CEILING_GAP: f64 = 1e-6;

/// What happens to a path that reaches the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorMode {
    /// Stop the path; it counts as `r_t ≤ η` for every `η ≥ floor`.
    Freeze,
    /// Keep integrating `ln r` with the coefficients frozen at the floor.
    Linearize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub paths: usize,
    pub seed: u64,
    /// Defaults to `1e-12 × scale`.
    pub floor: Option<T>,
    /// Defaults to `0.05 × scale`.
    pub switch: Option<T>,
    /// Defaults to `1e-6 × min(R, 1)`.
    pub ceiling_gap: Option<T>,
    pub floor_mode: FloorMode,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, horizon: T, paths: usize, seed: u64) -> Self {
        SimConfig {
            dt,
            horizon,
            paths,
            seed,
            floor: None,
            switch: None,
            ceiling_gap: None,
            floor_mode: FloorMode::Freeze,
        }
    }

    pub(crate) fn resolve(&self, spec: &DiffusionSpec<T>) -> Result<Resolved<T>> {
        let scale = spec.scale();
        let floor = self.floor.unwrap_or(T::lit(DEFAULT_FLOOR) * scale);
        let switch = self.switch.unwrap_or(T::lit(DEFAULT_SWITCH) * scale);
        let ceiling_gap = self
            .ceiling_gap
            .unwrap_or(T::lit(DEFAULT_CEILING_GAP) * spec.upper().min(T::one()));
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.dt > T::zero() && self.horizon > T::zero() && self.horizon.is_finite()) {
            return bad(format!("dt = {} and horizon = {} must be positive", self.dt, self.horizon));
        }
        if !(self.dt < self.horizon) {
            return bad(format!("dt = {} must be below the horizon {}", self.dt, self.horizon));
        }
        if self.paths == 0 {
            return bad("at least one path is required".into());
        }
        if !(floor > T::zero() && floor < switch && switch < spec.upper()) {
            return bad(format!("need 0 < floor ({floor}) < switch ({switch}) < R ({})", spec.upper()));
        }
        if !(ceiling_gap > T::zero()) || (spec.is_bounded() && ceiling_gap >= spec.upper() - switch) {
            return bad(format!("ceiling gap {ceiling_gap} out of range"));
        }
        let steps = (self.horizon / self.dt).round().to_usize().unwrap_or(0);
        Ok(Resolved {
            dt: self.dt,
            steps,
            paths: self.paths,
            seed: self.seed,
            floor,
            switch,
            ceiling: spec.upper() - ceiling_gap,
            floor_mode: self.floor_mode,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Resolved<T> {
    pub dt: T,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub floor: T,
    pub switch: T,
    /// `R - ε_ceil`, or `+inf`.
    pub ceiling: T,
    pub floor_mode: FloorMode,
}
