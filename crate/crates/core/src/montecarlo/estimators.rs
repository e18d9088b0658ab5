use serde::Serialize;

use super::engine::simulate_distance_paths;
use super::{FloorMode, SimConfig};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scalar_diffusion::DiffusionSpec;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;
/// Fraction of excluded paths above which the Lyapunov estimate carries a warning.
pub const REGIME_WARNING: f64 = 0.2;
/// Largest starting separation for the Lyapunov estimator, relative to the interval scale.
pub const LYAPUNOV_MAX_R0: f64 = 1e-4;

/// Wilson score interval `(lo, hi)` for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical law of `r_t ≤ η`, indexed `[time][threshold]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceLawEstimate<T> {
    pub times: Vec<T>,
    pub thresholds: Vec<T>,
    pub prob: Vec<Vec<T>>,
    pub ci_lo: Vec<Vec<T>>,
    pub ci_hi: Vec<Vec<T>>,
    /// Half the width of the Wilson interval.
    pub ci_halfwidth: Vec<Vec<T>>,
    pub paths_used: usize,
    pub seed: u64,
    pub floor_hits: usize,
    pub clamp_fraction: f64,
}

fn check_thresholds<T: Real>(etas: &[T]) -> Result<()> {
    if etas.is_empty() {
        return Err(Error::InvalidInput("at least one threshold is required".into()));
    }
    for &eta in etas {
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("threshold η = {eta} must be positive and finite")));
        }
    }
    Ok(())
}

/// `P(r_t ≤ η)` for every requested time and threshold. Paths frozen at the floor count as
/// below every threshold at or above the floor.
pub fn estimate_sync_probability<T: Real>(
    spec: &DiffusionSpec<T>,
    r0: T,
    etas: &[T],
    times: &[T],
    cfg: &SimConfig<T>,
) -> Result<DistanceLawEstimate<T>> {
    check_thresholds(etas)?;
    if times.is_empty() {
        return Err(Error::InvalidInput("at least one time is required".into()));
    }
    let set = simulate_distance_paths(spec, r0, cfg, times)?;
    let n = set.paths();
    let ln_etas: Vec<T> = etas.iter().map(|e| e.ln()).collect();
    let mut out = DistanceLawEstimate {
        times: set.times.clone(),
        thresholds: etas.to_vec(),
        prob: Vec::with_capacity(times.len()),
        ci_lo: Vec::with_capacity(times.len()),
        ci_hi: Vec::with_capacity(times.len()),
        ci_halfwidth: Vec::with_capacity(times.len()),
        paths_used: n,
        seed: set.seed,
        floor_hits: set.floor_hits,
        clamp_fraction: set.clamp_fraction(),
    };
    for slice in &set.log_r {
        let (mut p, mut lo, mut hi, mut hw) = (vec![], vec![], vec![], vec![]);
        for &le in &ln_etas {
            let k = slice.iter().filter(|&&v| v <= le).count();
            let (a, b) = wilson_interval(k, n);
            p.push(T::lit(k as f64 / n as f64));
            lo.push(T::lit(a));
            hi.push(T::lit(b));
            hw.push(T::lit(0.5 * (b - a)));
        }
        out.prob.push(p);
        out.ci_lo.push(lo);
        out.ci_hi.push(hi);
        out.ci_halfwidth.push(hw);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate<T> {
    /// Mean of `(1/T) ln(r_T / r_0)` over retained paths.
    pub mean: T,
    pub std_error: T,
    pub ci_lo: T,
    pub ci_hi: T,
    pub r0: T,
    pub horizon: T,
    pub paths_used: usize,
    pub excluded_fraction: f64,
    /// More than a fifth of the paths left the linearization regime.
    pub regime_warning: bool,
}

/// Small-separation estimate of the top Lyapunov exponent.
///
/// Paths run in `Linearize` floor mode so that separations below the floor keep contributing;
/// paths that ever exceed the switch threshold are dropped.
pub fn estimate_top_lyapunov<T: Real>(
    spec: &DiffusionSpec<T>,
    r0_small: T,
    cfg: &SimConfig<T>,
) -> Result<LyapunovEstimate<T>> {
    if !(r0_small > T::zero() && r0_small <= T::lit(LYAPUNOV_MAX_R0) * spec.scale()) {
        return Err(Error::InvalidInput(format!(
            "r0 = {r0_small} must lie in (0, {}]",
            T::lit(LYAPUNOV_MAX_R0) * spec.scale()
        )));
    }
    let mut cfg = cfg.clone();
    cfg.floor_mode = FloorMode::Linearize;
    let set = simulate_distance_paths(spec, r0_small, &cfg, &[])?;
    let horizon = T::from_usize_lossy(cfg.resolve(spec)?.steps) * cfg.dt;
    let ln_r0 = r0_small.ln();
    let rates: Vec<f64> = set
        .terminal
        .iter()
        .zip(&set.exceeded_switch)
        .filter(|(_, &ex)| !ex)
        .map(|(&v, _)| ((v - ln_r0) / horizon).as_f64())
        .collect();
    let n = rates.len();
    let excluded_fraction = 1.0 - n as f64 / set.paths() as f64;
    if n < 2 {
        return Err(Error::Inconclusive(format!(
            "only {n} of {} paths stayed in the linearization regime",
            set.paths()
        )));
    }
    let mean = rates.iter().sum::<f64>() / n as f64;
    let var = rates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    Ok(LyapunovEstimate {
        mean: T::lit(mean),
        std_error: T::lit(se),
        ci_lo: T::lit(mean - WILSON_Z * se),
        ci_hi: T::lit(mean + WILSON_Z * se),
        r0: r0_small,
        horizon,
        paths_used: n,
        excluded_fraction,
        regime_warning: excluded_fraction > REGIME_WARNING,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow<T> {
    pub r0: T,
    pub prob: Vec<T>,
    /// Minimum of `prob` over the second half of the time grid.
    pub tail_min: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProfile<T> {
    pub eta: T,
    pub times: Vec<T>,
    pub rows: Vec<ProfileRow<T>>,
    /// Every row has a strictly positive tail minimum.
    pub consistent: bool,
}

/// Empirical pointwise-stability table: `P(r_t ≤ η)` per starting separation over `time_grid`.
pub fn stability_profile<T: Real>(
    spec: &DiffusionSpec<T>,
    pairs: &[T],
    eta: T,
    time_grid: &[T],
    cfg: &SimConfig<T>,
) -> Result<StabilityProfile<T>> {
    check_thresholds(&[eta])?;
    if pairs.is_empty() || time_grid.is_empty() {
        return Err(Error::InvalidInput("need at least one r0 and one time".into()));
    }
    let tail_start = time_grid.len() / 2;
    let mut rows = Vec::with_capacity(pairs.len());
    let mut times = Vec::new();
    for &r0 in pairs {
        let est = estimate_sync_probability(spec, r0, &[eta], time_grid, cfg)?;
        let prob: Vec<T> = est.prob.iter().map(|p| p[0]).collect();
        let tail_min = prob[tail_start..].iter().copied().fold(T::one(), |a, b| a.min(b));
        times = est.times;
        rows.push(ProfileRow { r0, prob, tail_min });
    }
    let consistent = rows.iter().all(|r| r.tail_min > T::zero());
    Ok(StabilityProfile {
        eta,
        times,
        rows,
        consistent,
    })
}
