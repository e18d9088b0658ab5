use crate::real::Real;

use super::linalg::least_squares;
use super::quadrature::Integrand;
use super::NumericsError;

/// Inner edge of the default sampling window, relative to the interval length.
pub const DEFAULT_WINDOW_NEAR: f64 = 1e-8;
/// Outer edge of the default sampling window, relative to the interval length.
pub const DEFAULT_WINDOW_FAR: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 40;
/// Largest relative deviation of a power-law fit that still counts as a fit.
pub const FIT_TOLERANCE: f64 = 0.01;

// Local log-log slopes beyond this magnitude, growing toward the endpoint, mark
// faster-than-any-power behavior.
const SUPER_ALGEBRAIC_SLOPE: f64 = 50.0;

/// Which side of the endpoint the integrand lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
}

/// Range of distances `[near, far]` from the endpoint that is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub near: T,
    pub far: T,
}

impl<T: Real> Window<T> {
    /// The default window `[1e-8, 1e-3] * length`.
    pub fn relative_to(length: T) -> Self {
        Window {
            near: T::lit(DEFAULT_WINDOW_NEAR) * length,
            far: T::lit(DEFAULT_WINDOW_FAR) * length,
        }
    }

    /// Both edges pulled toward the endpoint by `factor`.
    pub fn shrunk(self, factor: T) -> Self {
        Window {
            near: self.near / factor,
            far: self.far / factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// `f ~ C |x - endpoint|^p` with a finite exponent.
    PowerLaw,
    /// `f` vanishes faster than any power; exponent is `+inf`.
    SuperAlgebraicDecay,
    /// `f` blows up faster than any power; exponent is `-inf`.
    SuperAlgebraicGrowth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointAnalysis<T> {
    pub endpoint: T,
    pub side: Side,
    pub exponent: T,
    pub fit_residual: T,
    pub integrable: bool,
    pub behavior: Behavior,
    pub window: Window<T>,
}

impl<T: Real> EndpointAnalysis<T> {
    /// Distance of the exponent from the integrability threshold `-1`.
    pub fn margin(&self) -> T {
        self.exponent + T::one()
    }
}

/// Fits `ln f(x) ≈ p ln δ + c0 + c1 (δ/far) + c2 (δ/far)^2`, `δ = |x - endpoint|`, on a geometric
/// grid of the window and reports `p`.
///
/// The two polynomial terms absorb analytic corrections to the leading power law so that `p` is
/// accurate well beyond the window's largest relative correction.
pub fn endpoint_exponent<T, F>(
    f: &F,
    endpoint: T,
    side: Side,
    window: Window<T>,
) -> Result<EndpointAnalysis<T>, NumericsError>
where
    T: Real,
    F: Integrand<T> + ?Sized,
{
    let fail = |reason: String| NumericsError::FitFailure {
        endpoint: endpoint.as_f64(),
        reason,
    };
    if !(window.near > T::zero() && window.far > window.near) || !endpoint.is_finite() {
        return Err(fail(format!(
            "invalid window [{}, {}] at endpoint {}",
            window.near, window.far, endpoint
        )));
    }

    let n = DEFAULT_SAMPLES;
    let ratio = window.far / window.near;
    let deltas: Vec<T> = (0..n)
        .map(|i| window.near * ratio.powf(T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)))
        .collect();
    let logs: Vec<T> = deltas
        .iter()
        .map(|&d| {
            let x = match side {
                Side::Above => endpoint + d,
                Side::Below => endpoint - d,
            };
            f.ln_eval(x)
        })
        .collect();

    if let Some(i) = logs.iter().position(|v| v.is_nan()) {
        return Err(fail(format!("integrand non-positive or undefined at distance {}", deltas[i])));
    }
    if let Some(i) = logs.iter().position(|v| *v == T::infinity()) {
        return Err(fail(format!("integrand infinite at distance {}", deltas[i])));
    }
    let zeros = logs.iter().take_while(|v| v.is_infinite()).count();
    if zeros > 0 {
        if logs[zeros..].iter().any(|v| v.is_infinite()) {
            return Err(fail("integrand vanishes on a non-contiguous set of samples".into()));
        }
        return Ok(EndpointAnalysis {
            endpoint,
            side,
            exponent: T::infinity(),
            fit_residual: T::zero(),
            integrable: true,
            behavior: Behavior::SuperAlgebraicDecay,
            window,
        });
    }

    let ln_d: Vec<T> = deltas.iter().map(|d| d.ln()).collect();
    let lin: Vec<T> = deltas.iter().map(|&d| d / window.far).collect();
    let quad: Vec<T> = lin.iter().map(|&v| v * v).collect();
    let columns = vec![ln_d.clone(), vec![T::one(); n], lin.clone(), quad.clone()];
    let coef = least_squares(&columns, &logs).ok_or_else(|| fail("singular least-squares system".into()))?;
    let residual = (0..n)
        .map(|i| {
            let fitted = coef[0] * ln_d[i] + coef[1] + coef[2] * lin[i] + coef[3] * quad[i];
            ((logs[i] - fitted).exp() - T::one()).abs()
        })
        .fold(T::zero(), T::max);

    if residual.is_finite() && residual < T::lit(FIT_TOLERANCE) {
        let exponent = coef[0];
        return Ok(EndpointAnalysis {
            endpoint,
            side,
            exponent,
            fit_residual: residual,
            integrable: exponent > -T::one(),
            behavior: Behavior::PowerLaw,
            window,
        });
    }

    // Local slopes ordered from the innermost pair outward.
    let slopes: Vec<T> = (0..n - 1)
        .map(|i| (logs[i + 1] - logs[i]) / (ln_d[i + 1] - ln_d[i]))
        .collect();
    let inner = slopes[0];
    let outer = slopes[n - 2];
    let same_sign = slopes.iter().all(|s| s.signum() == inner.signum());
    let monotone = slopes
        .windows(2)
        .all(|w| w[1].abs() <= w[0].abs() * (T::one() + T::lit(1e-9)));
    if same_sign
        && monotone
        && inner.abs() > T::lit(SUPER_ALGEBRAIC_SLOPE)
        && inner.abs() > T::lit(10.0) * outer.abs()
    {
        let decays = inner > T::zero();
        return Ok(EndpointAnalysis {
            endpoint,
            side,
            exponent: if decays { T::infinity() } else { T::neg_infinity() },
            fit_residual: if residual.is_finite() { residual } else { T::max_value() },
            integrable: decays,
            behavior: if decays {
                Behavior::SuperAlgebraicDecay
            } else {
                Behavior::SuperAlgebraicGrowth
            },
            window,
        });
    }

    Err(fail(format!(
        "fit residual {} exceeds tolerance {}",
        residual, FIT_TOLERANCE
    )))
}
