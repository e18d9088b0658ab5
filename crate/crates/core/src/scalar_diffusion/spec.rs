use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::quadrature::gauss10;
use crate::numerics::quadrature::integrate_limited;
use crate::numerics::NumericsError;
use crate::real::Real;

/// A coefficient function of the distance variable.
pub type Coefficient<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

const GRID_POINTS: usize = 2000;
const NODE_STEP: f64 = 0.5;
const PANEL_TOL: f64 = 1e-13;
const PANEL_ABS_TOL: f64 = 1e-7;
const PANEL_LIMIT: usize = 32;

/// Scalar diffusion `dr = b(r) dt + σ(r) dW` on `(0, R)`, `R` possibly infinite.
///
/// Construction validates the coefficients and tabulates `Φ(x) = ∫_c^x 2b/σ²`, so every later
/// evaluation of the scale and speed densities is cheap.
#[derive(Clone)]
pub struct DiffusionSpec<T: Real> {
    upper: T,
    reference: T,
    label: String,
    drift: Coefficient<T>,
    variance: Coefficient<T>,
    potential: Arc<Potential<T>>,
}

impl<T: Real> fmt::Debug for DiffusionSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("label", &self.label)
            .field("upper", &self.upper)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

impl<T: Real> DiffusionSpec<T> {
    /// Builds a spec from the drift `b` and the diffusion coefficient `σ`.
    pub fn new<B, S>(upper: T, drift: B, diffusion: S, reference: T, label: impl Into<String>) -> Result<Self>
    where
        B: Fn(T) -> T + Send + Sync + 'static,
        S: Fn(T) -> T + Send + Sync + 'static,
    {
        Self::from_variance(upper, drift, move |x| diffusion(x).powi(2), reference, label)
    }

    /// Builds a spec from the drift and `σ²`; preferable when `σ²` has a cancellation-free form.
    pub fn from_variance<B, V>(upper: T, drift: B, variance: V, reference: T, label: impl Into<String>) -> Result<Self>
    where
        B: Fn(T) -> T + Send + Sync + 'static,
        V: Fn(T) -> T + Send + Sync + 'static,
    {
        let label = label.into();
        if upper.is_nan() || upper <= T::zero() {
            return Err(Error::InvalidSpec(format!("{label}: upper end {upper} must be positive or +inf")));
        }
        if !(reference > T::zero() && reference < upper && reference.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "{label}: reference {reference} must lie strictly inside (0, {upper})"
            )));
        }
        let drift: Coefficient<T> = Arc::new(drift);
        let variance: Coefficient<T> = Arc::new(variance);
        let coord = Coord::new(upper, reference);
        validate(&label, coord, reference, &*drift, &*variance)?;
        let potential = Potential::build(coord, reference, &*drift, &*variance)
            .map_err(|e| Error::InvalidSpec(format!("{label}: cannot tabulate ∫2b/σ²: {e}")))?;
        Ok(DiffusionSpec {
            upper,
            reference,
            label,
            drift,
            variance,
            potential: Arc::new(potential),
        })
    }

    /// Right end `R` of the interval (may be `+inf`).
    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }

    pub fn reference(&self) -> T {
        self.reference
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `R` when finite, otherwise the reference point.
    pub fn scale(&self) -> T {
        if self.is_bounded() {
            self.upper
        } else {
            self.reference
        }
    }

    pub fn contains(&self, x: T) -> bool {
        x > T::zero() && x < self.upper
    }

    #[inline]
    pub fn drift(&self, x: T) -> T {
        (self.drift)(x)
    }

    #[inline]
    pub fn variance(&self, x: T) -> T {
        (self.variance)(x)
    }

    #[inline]
    pub fn diffusion(&self, x: T) -> T {
        self.variance(x).sqrt()
    }

    /// Drift of `ln r`: `b(r)/r - σ²(r)/(2r²)`.
    #[inline]
    pub fn log_drift(&self, x: T) -> T {
        self.drift(x) / x - self.variance(x) / (T::lit(2.0) * x * x)
    }

    /// `Φ(x) = ∫_c^x 2b/σ²`; `ln s'(x) = -Φ(x)`.
    pub(crate) fn potential(&self, x: T) -> T {
        self.potential.eval(x, &*self.drift, &*self.variance)
    }
}

/// Interior coordinate `y`: `ln(x/(R-x))` on a bounded interval, `ln x` otherwise.
#[derive(Debug, Clone, Copy)]
struct Coord<T> {
    upper: T,
    bounded: bool,
}

impl<T: Real> Coord<T> {
    fn new(upper: T, _reference: T) -> Self {
        Coord {
            upper,
            bounded: upper.is_finite(),
        }
    }

    fn x(&self, y: T) -> T {
        if self.bounded {
            self.upper / (T::one() + (-y).exp())
        } else {
            y.exp()
        }
    }

    fn y(&self, x: T) -> T {
        if self.bounded {
            (x / (self.upper - x)).ln()
        } else {
            x.ln()
        }
    }

    fn dxdy(&self, y: T) -> T {
        if self.bounded {
            self.upper / ((T::one() + (-y).exp()) * (T::one() + y.exp()))
        } else {
            y.exp()
        }
    }

    /// Range of `y` covered by the potential table.
    fn range(&self, scale: T) -> (T, T) {
        let tiny = T::min_positive_value().sqrt() * T::lit(1e9);
        let gap = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        if self.bounded {
            (self.y(self.upper * tiny), ((T::one() - gap) / gap).ln())
        } else {
            (self.y(scale * tiny), self.y(scale * T::lit(1e12)))
        }
    }
}

fn validate<T: Real>(
    label: &str,
    coord: Coord<T>,
    reference: T,
    drift: &dyn Fn(T) -> T,
    variance: &dyn Fn(T) -> T,
) -> Result<()> {
    let scale = if coord.bounded { coord.upper } else { reference };
    let (lo, hi) = if coord.bounded {
        let g = T::lit(1e-6);
        (coord.y(coord.upper * g), coord.y(coord.upper * (T::one() - g)))
    } else {
        (coord.y(scale * T::lit(1e-6)), coord.y(scale * T::lit(1e6)))
    };
    for i in 0..GRID_POINTS {
        let y = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(GRID_POINTS - 1);
        let x = coord.x(y);
        let b = drift(x);
        let v = variance(x);
        if !b.is_finite() {
            return Err(Error::InvalidSpec(format!("{label}: drift not finite at x = {x}")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidSpec(format!("{label}: σ² not finite at x = {x}")));
        }
        if !(v > T::zero()) {
            return Err(Error::InvalidSpec(format!("{label}: σ² = {v} is not positive at x = {x}")));
        }
    }
    let small = T::lit(1e-6) * scale.min(T::one());
    let ratio = (variance(small) / variance(reference)).sqrt();
    if !(ratio < T::lit(1e-2)) {
        return Err(Error::InvalidSpec(format!(
            "{label}: σ does not vanish at 0 (σ({small})/σ({reference}) = {ratio})"
        )));
    }
    Ok(())
}

/// Table of `Φ` at nodes spaced `NODE_STEP` apart in `y`, anchored at the reference point.
struct Potential<T> {
    coord: Coord<T>,
    y_ref: T,
    step: T,
    below: Vec<T>,
    above: Vec<T>,
}

impl<T: Real> Potential<T> {
    fn integrand(coord: Coord<T>, drift: &dyn Fn(T) -> T, variance: &dyn Fn(T) -> T, y: T) -> T {
        let x = coord.x(y);
        T::lit(2.0) * drift(x) / variance(x) * coord.dxdy(y)
    }

    fn build(
        coord: Coord<T>,
        reference: T,
        drift: &dyn Fn(T) -> T,
        variance: &dyn Fn(T) -> T,
    ) -> std::result::Result<Self, NumericsError> {
        let scale = if coord.bounded { coord.upper } else { reference };
        let (y_min, y_max) = coord.range(scale);
        let y_ref = coord.y(reference);
        let step = T::lit(NODE_STEP);
        let g = |y: T| Self::integrand(coord, drift, variance, y);
        let noise_floor = |y: T, estimate: f64| {
            let relative = if coord.bounded { T::epsilon() * (T::one() + y.exp()) } else { T::epsilon() };
            PANEL_ABS_TOL + 1e3 * relative.as_f64() * estimate.abs()
        };
        let tabulate = |dir: T, limit: T| -> std::result::Result<Vec<T>, _> {
            let mut out = vec![T::zero()];
            let mut y = y_ref;
            while (limit - y) * dir > T::zero() {
                let next = y + dir * step;
                let value = match integrate_limited(&g, y.min(next), y.max(next), T::lit(PANEL_TOL), PANEL_LIMIT) {
                    Ok(panel) => panel.value,
                    // Near a finite R the coefficients only see x to within ulp(R), which puts a
                    // noise floor under the relative tolerance; an absolute bound suffices for Φ.
                    Err(NumericsError::NonConvergence { estimate, error, .. })
                        if estimate.is_finite() && error <= noise_floor(y.max(next), estimate) =>
                    {
                        T::lit(estimate)
                    }
                    Err(e) => return Err(e),
                };
                out.push(*out.last().unwrap() + dir * value);
                y = next;
            }
            Ok(out)
        };
        let below = tabulate(-T::one(), y_min)?;
        let above = tabulate(T::one(), y_max)?;
        Ok(Potential {
            coord,
            y_ref,
            step,
            below,
            above,
        })
    }

    fn eval(&self, x: T, drift: &dyn Fn(T) -> T, variance: &dyn Fn(T) -> T) -> T {
        let y = self.coord.y(x);
        let g = |y: T| Self::integrand(self.coord, drift, variance, y);
        let offset = (y - self.y_ref) / self.step;
        let (table, dir) = if offset >= T::zero() {
            (&self.above, T::one())
        } else {
            (&self.below, -T::one())
        };
        let last = table.len() - 1;
        let k = offset.abs().round().to_usize().unwrap_or(usize::MAX);
        if k <= last {
            let node = self.y_ref + dir * T::from_usize_lossy(k) * self.step;
            return table[k] + gauss10(&g, node, y);
        }
        // Beyond the table the integrand is taken constant in y, i.e. a power law in x.
        let node = self.y_ref + dir * T::from_usize_lossy(last) * self.step;
        table[last] + g(node) * (y - node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(kappa: f64) -> DiffusionSpec<f64> {
        DiffusionSpec::new(f64::INFINITY, move |x| kappa * x, |x| x, 1.0, "geometric").unwrap()
    }

    #[test]
    fn potential_of_geometric_family() {
        for kappa in [0.1, 0.25, 0.4] {
            let spec = geometric(kappa);
            for x in [1e-120, 1e-9, 0.3, 1.0, 7.0, 1e8] {
                let exact = 2.0 * kappa * f64::ln(x);
                assert!((spec.potential(x) - exact).abs() < 1e-9 * (1.0 + exact.abs()), "x={x}");
            }
        }
    }

    #[test]
    fn potential_on_bounded_interval() {
        // 2b/σ² = 1 gives Φ(x) = x - 1.
        let spec = DiffusionSpec::new(2.0, |x: f64| 0.5 * x * x, |x| x, 1.0, "quad").unwrap();
        for x in [1e-8, 0.5, 1.0, 1.5, 2.0 - 1e-9] {
            assert!((spec.potential(x) - (x - 1.0)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn validation() {
        let bad = DiffusionSpec::new(f64::INFINITY, |x: f64| x, |_| 1.0, 1.0, "flat");
        assert!(matches!(bad, Err(Error::InvalidSpec(m)) if m.contains("vanish")));
        let bad = DiffusionSpec::new(f64::INFINITY, |x: f64| x, |x: f64| x * (x - 2.0), 1.0, "sign");
        assert!(matches!(bad, Err(Error::InvalidSpec(_))));
        let bad = DiffusionSpec::new(f64::INFINITY, |x: f64| 1.0 / (x - 3.0), |x| x, 1.0, "pole");
        assert!(bad.is_err());
        assert!(DiffusionSpec::new(1.0, |x: f64| x, |x| x, 1.5, "ref").is_err());
    }

    #[test]
    fn single_precision_spec() {
        let spec = DiffusionSpec::<f32>::new(f32::INFINITY, |x| 0.25 * x, |x| x, 1.0, "g32").unwrap();
        assert!((spec.potential(4.0) - 0.5 * 4f32.ln()).abs() < 1e-4);
    }
}
