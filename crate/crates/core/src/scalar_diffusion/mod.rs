//! Scale function, speed measure and Feller boundary classification of a scalar diffusion
//! `dr = b(r) dt + σ(r) dW` on `(0, R)`, and the synchronization dichotomy built on them.
//!
//! Conventions: `s'(x) = exp(-∫_c^x 2b/σ²)`, `s(c) = 0`, `m(dx) = 2/(s'(x)σ²(x)) dx`.

mod spec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::numerics::quadrature::Inverted;
use crate::numerics::{
    endpoint_exponent, integrate_adaptive, Behavior, EndpointAnalysis, Integral, Integrand, NumericsError, Side,
    Window, DIVERGENCE_MARGIN,
};
use crate::real::Real;

pub use spec::{Coefficient, DiffusionSpec};

/// Relative tolerance for scale and speed integrals.
pub const QUAD_TOL: f64 = 1e-10;
/// Half-width of the band around exponent `-1` at 0 in which the speed mass is undecided.
pub const CRITICAL_BAND: f64 = 1e-4;
/// Inside the critical band, distance to `-1` that still counts as exactly `-1`.
pub const CRITICAL_DECISIVE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "R")]
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport<T: Real> {
    pub boundary: Boundary,
    pub scale_limit: Extended<T>,
    pub accessible: bool,
    /// `m(0, ε)` for the zero boundary, `m[ε, R)` for `R`, with `ε = min(R, 1)/2`.
    pub speed_mass_near: Extended<T>,
    /// Endpoint exponent of the Feller integrand, when `s` is finite at the boundary.
    pub feller_exponent: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Synchronizes,
    Ergodic,
    NotApplicable,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EvidenceValue {
    Number(Extended<f64>),
    Flag(bool),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub name: String,
    pub value: EvidenceValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncVerdict<T: Real> {
    pub verdict: Verdict,
    /// `m(I)`; absent when the critical band leaves it undecided.
    pub speed_total: Option<Extended<T>>,
    pub assumptions_ok: bool,
    /// Names of the standing assumptions that fail.
    pub violated: Vec<String>,
    /// `m(0, ε)`, absent when undecided.
    pub speed_near_zero: Option<Extended<T>>,
    /// Set when `m(I) = ∞` was decided from an exponent inside the critical band.
    pub critical: bool,
    pub evidence: Vec<Evidence>,
}

/// Outcome of the speed-measure analysis at 0.
#[derive(Debug, Clone, PartialEq)]
pub enum NearZero<T> {
    Infinite { critical: bool },
    Finite(T),
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearZeroSpeed<T> {
    pub analysis: EndpointAnalysis<T>,
    pub outcome: NearZero<T>,
}

struct ScaleDensity<'a, T: Real>(&'a DiffusionSpec<T>);

impl<T: Real> Integrand<T> for ScaleDensity<'_, T> {
    fn eval(&self, x: T) -> T {
        self.ln_eval(x).exp()
    }

    fn ln_eval(&self, x: T) -> T {
        -self.0.potential(x)
    }
}

struct SpeedDensity<'a, T: Real>(&'a DiffusionSpec<T>);

impl<T: Real> Integrand<T> for SpeedDensity<'_, T> {
    fn eval(&self, x: T) -> T {
        self.ln_eval(x).exp()
    }

    fn ln_eval(&self, x: T) -> T {
        T::LN_2() - self.0.variance(x).ln() + self.0.potential(x)
    }
}

/// `(s(x) - s(0+)) m'(x)` or `(s(R-) - s(x)) m'(x)`.
struct Feller<'a, T: Real> {
    spec: &'a DiffusionSpec<T>,
    boundary: Boundary,
}

impl<T: Real> Integrand<T> for Feller<'_, T> {
    fn eval(&self, x: T) -> T {
        self.ln_eval(x).exp()
    }

    fn ln_eval(&self, x: T) -> T {
        let (lo, hi) = match self.boundary {
            Boundary::Zero => (T::zero(), x),
            Boundary::Upper => (x, self.spec.upper()),
        };
        match integrate_adaptive(&ScaleDensity(self.spec), lo, hi, T::lit(QUAD_TOL)) {
            Ok(Integral::Value(e)) if e.value > T::zero() => e.value.ln() + SpeedDensity(self.spec).ln_eval(x),
            _ => T::nan(),
        }
    }
}

fn check_inside<T: Real>(spec: &DiffusionSpec<T>, x: T) -> Result<()> {
    if spec.contains(x) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("x = {x} outside (0, {})", spec.upper())))
    }
}

/// `ε = min(R, 1)/2`, the point separating "near 0" from "away from 0".
pub fn split_point<T: Real>(spec: &DiffusionSpec<T>) -> T {
    spec.upper().min(T::one()) * T::lit(0.5)
}

/// `s'(x) = exp(-∫_c^x 2b/σ²)`.
pub fn scale_density<T: Real>(spec: &DiffusionSpec<T>, x: T) -> Result<T> {
    check_inside(spec, x)?;
    Ok(ScaleDensity(spec).eval(x))
}

/// `ln s'(x)`; finite even where `s'` itself over- or underflows.
pub fn ln_scale_density<T: Real>(spec: &DiffusionSpec<T>, x: T) -> Result<T> {
    check_inside(spec, x)?;
    Ok(ScaleDensity(spec).ln_eval(x))
}

/// `s(x) = ∫_c^x s'`.
pub fn scale_function<T: Real>(spec: &DiffusionSpec<T>, x: T) -> Result<T> {
    check_inside(spec, x)?;
    let c = spec.reference();
    if x == c {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if x < c { (x, c, -T::one()) } else { (c, x, T::one()) };
    match integrate_adaptive(&ScaleDensity(spec), lo, hi, T::lit(QUAD_TOL))? {
        Integral::Value(e) => Ok(sign * e.value),
        Integral::Divergent(a) => Err(Error::Inconclusive(format!(
            "scale integral between interior points diverges at {}",
            a.endpoint
        ))),
    }
}

/// `s(0+)` or `s(R-)`.
pub fn scale_limit<T: Real>(spec: &DiffusionSpec<T>, boundary: Boundary) -> Result<Extended<T>> {
    let c = spec.reference();
    let tol = T::lit(QUAD_TOL);
    Ok(match boundary {
        Boundary::Zero => match integrate_adaptive(&ScaleDensity(spec), T::zero(), c, tol)? {
            Integral::Value(e) => Extended::Finite(-e.value),
            Integral::Divergent(_) => Extended::NegInfinity,
        },
        Boundary::Upper => match integrate_adaptive(&ScaleDensity(spec), c, spec.upper(), tol)? {
            Integral::Value(e) => Extended::Finite(e.value),
            Integral::Divergent(_) => Extended::PosInfinity,
        },
    })
}

/// `m'(x) = 2/(s'(x)σ²(x))`.
pub fn speed_density<T: Real>(spec: &DiffusionSpec<T>, x: T) -> Result<T> {
    check_inside(spec, x)?;
    Ok(SpeedDensity(spec).eval(x))
}

/// `m((lo, hi))`; `lo = 0` and `hi = R` are allowed.
pub fn speed_mass<T: Real>(spec: &DiffusionSpec<T>, lo: T, hi: T) -> Result<Extended<T>> {
    if !(lo >= T::zero() && lo < hi && hi <= spec.upper()) {
        return Err(Error::InvalidInput(format!("speed mass on ({lo}, {hi}) outside (0, {})", spec.upper())));
    }
    Ok(match integrate_adaptive(&SpeedDensity(spec), lo, hi, T::lit(QUAD_TOL))? {
        Integral::Value(e) => Extended::Finite(e.value),
        Integral::Divergent(_) => Extended::PosInfinity,
    })
}

/// Feller classification: a boundary with finite scale limit is accessible iff
/// `∫ |s(x) - s(boundary)| m(dx)` is finite near it.
pub fn boundary_classify<T: Real>(spec: &DiffusionSpec<T>, boundary: Boundary) -> Result<BoundaryReport<T>> {
    let eps = split_point(spec);
    let scale_limit = scale_limit(spec, boundary)?;
    let speed_mass_near = match boundary {
        Boundary::Zero => speed_mass(spec, T::zero(), eps)?,
        Boundary::Upper => speed_mass(spec, eps, spec.upper())?,
    };
    let mut report = BoundaryReport {
        boundary,
        scale_limit,
        accessible: false,
        speed_mass_near,
        feller_exponent: None,
    };
    if !scale_limit.is_finite() {
        return Ok(report);
    }
    if boundary == Boundary::Upper && spec.is_bounded() {
        if let Some(p) = power_law_feller_exponent(spec, eps)? {
            report.feller_exponent = Some(p);
            report.accessible = p > T::lit(-1.0 + DIVERGENCE_MARGIN);
            return Ok(report);
        }
    }
    let feller = Feller { spec, boundary };
    let analysis = match boundary {
        Boundary::Zero => endpoint_exponent(&feller, T::zero(), Side::Above, Window::relative_to(eps)),
        Boundary::Upper if spec.is_bounded() => {
            let r = spec.upper();
            endpoint_exponent(&feller, r, Side::Below, Window::relative_to(r - eps))
        }
        Boundary::Upper => {
            endpoint_exponent(&Inverted(&feller), T::zero(), Side::Above, Window::relative_to(eps.recip()))
        }
    }
    .map_err(|e| inconclusive(boundary, e))?;
    report.feller_exponent = Some(analysis.exponent);
    report.accessible = !divergent(&analysis);
    Ok(report)
}

/// Exponent of `(s(R-) - s(x)) m'(x)` at a finite `R` when `s'` and `m'` are both power laws there:
/// `s' ~ δ^q` with `q > -1` and `m' ~ δ^p` give `δ^(q + 1 + p)`. Avoids integrating `s'` over
/// intervals shorter than the resolution of `x` near `R`. `None` when either fit is not a power law.
fn power_law_feller_exponent<T: Real>(spec: &DiffusionSpec<T>, eps: T) -> Result<Option<T>> {
    let r = spec.upper();
    let window = Window::relative_to(r - eps);
    let fit = |f: &dyn Integrand<T>| endpoint_exponent(f, r, Side::Below, window).map_err(|e| inconclusive(Boundary::Upper, e));
    let scale = fit(&ScaleDensity(spec))?;
    let speed = fit(&SpeedDensity(spec))?;
    Ok(match (scale.behavior, speed.behavior) {
        (Behavior::PowerLaw, Behavior::PowerLaw) if scale.exponent > -T::one() => {
            Some(scale.exponent + T::one() + speed.exponent)
        }
        _ => None,
    })
}

fn inconclusive(boundary: Boundary, e: NumericsError) -> Error {
    Error::Inconclusive(format!("Feller integral at {boundary:?}: {e}"))
}

fn divergent<T: Real>(a: &EndpointAnalysis<T>) -> bool {
    match a.behavior {
        Behavior::SuperAlgebraicGrowth => true,
        Behavior::SuperAlgebraicDecay => false,
        Behavior::PowerLaw => a.exponent <= T::lit(-1.0 + DIVERGENCE_MARGIN),
    }
}

/// Speed measure near 0, with the critical band around exponent `-1` handled explicitly.
///
/// Inside the band `|p + 1| < CRITICAL_BAND` the mass is declared infinite only when
/// `|p + 1| <= CRITICAL_DECISIVE` and the exponent is unchanged by shrinking the window tenfold.
pub fn near_zero_speed<T: Real>(spec: &DiffusionSpec<T>) -> Result<NearZeroSpeed<T>> {
    let eps = split_point(spec);
    let density = SpeedDensity(spec);
    let window = Window::relative_to(eps);
    let analysis = endpoint_exponent(&density, T::zero(), Side::Above, window)?;
    let margin = analysis.margin();
    let outcome = match analysis.behavior {
        Behavior::SuperAlgebraicGrowth => NearZero::Infinite { critical: false },
        Behavior::PowerLaw if margin.abs() < T::lit(CRITICAL_BAND) => {
            let decisive = margin.abs() <= T::lit(CRITICAL_DECISIVE) && {
                let shrunk = endpoint_exponent(&density, T::zero(), Side::Above, window.shrunk(T::lit(10.0)))?;
                shrunk.margin().abs() <= T::lit(CRITICAL_DECISIVE)
                    && (shrunk.exponent - analysis.exponent).abs() <= T::lit(CRITICAL_DECISIVE)
            };
            if decisive {
                NearZero::Infinite { critical: true }
            } else {
                NearZero::Undecided
            }
        }
        Behavior::PowerLaw if margin <= -T::lit(CRITICAL_BAND) => NearZero::Infinite { critical: false },
        _ => match integrate_adaptive(&density, T::zero(), eps, T::lit(QUAD_TOL))? {
            Integral::Value(e) => NearZero::Finite(e.value),
            Integral::Divergent(a) => {
                return Err(Error::Consistency(format!(
                    "speed density at 0 has exponent {} but its integral diverges at {}",
                    analysis.exponent, a.endpoint
                )))
            }
        },
    };
    Ok(NearZeroSpeed { analysis, outcome })
}

fn number<T: Real>(name: &str, v: Extended<T>) -> Evidence {
    Evidence {
        name: name.into(),
        value: EvidenceValue::Number(v.to_f64()),
    }
}

fn real<T: Real>(name: &str, v: T) -> Evidence {
    number(name, Extended::from_real(v))
}

fn flag(name: &str, v: bool) -> Evidence {
    Evidence {
        name: name.into(),
        value: EvidenceValue::Flag(v),
    }
}

/// Decides whether `r_t -> 0` in probability: under the standing assumptions (both boundaries
/// inaccessible, `m[ε, R) < ∞`, `s(R-) = ∞`) this holds iff `m(I) = ∞`.
pub fn synchronization_verdict<T: Real>(spec: &DiffusionSpec<T>) -> Result<SyncVerdict<T>> {
    let eps = split_point(spec);
    let zero = boundary_classify(spec, Boundary::Zero)?;
    let upper = boundary_classify(spec, Boundary::Upper)?;
    let away = upper.speed_mass_near;

    let mut violated = Vec::new();
    if zero.accessible {
        violated.push("boundary 0 is accessible".to_string());
    }
    if upper.accessible {
        violated.push("boundary R is accessible".to_string());
    }
    if !away.is_finite() {
        violated.push(format!("speed measure infinite away from 0 (m[{eps}, R) = ∞)"));
    }
    if upper.scale_limit != Extended::PosInfinity {
        violated.push(format!("s(R-) = {} is not +inf", upper.scale_limit));
    }
    let assumptions_ok = violated.is_empty();

    let mut evidence = vec![
        number("s(0+)", zero.scale_limit),
        number("s(R-)", upper.scale_limit),
        flag("zero_accessible", zero.accessible),
        flag("R_accessible", upper.accessible),
        real("eps", eps),
        number("m[eps,R)", away),
    ];
    if let Some(p) = zero.feller_exponent {
        evidence.push(real("feller_exponent_zero", p));
    }
    if let Some(p) = upper.feller_exponent {
        evidence.push(real("feller_exponent_R", p));
    }

    let near = match near_zero_speed(spec) {
        Ok(n) => Some(n),
        Err(e) if !assumptions_ok => {
            evidence.push(Evidence {
                name: "near_zero_speed".into(),
                value: EvidenceValue::Text(e.to_string()),
            });
            None
        }
        Err(e) => return Err(e),
    };
    let mut critical = false;
    let mut speed_total = None;
    let mut speed_near_zero = None;
    if let Some(n) = &near {
        evidence.push(real("speed_exponent_zero", n.analysis.exponent));
        evidence.push(real("speed_exponent_fit_residual", n.analysis.fit_residual));
        match n.outcome {
            NearZero::Infinite { critical: c } => {
                critical = c;
                evidence.push(number("m(0,eps)", Extended::<T>::PosInfinity));
                speed_near_zero = Some(Extended::PosInfinity);
                speed_total = Some(Extended::PosInfinity);
            }
            NearZero::Finite(v) => {
                evidence.push(real("m(0,eps)", v));
                speed_near_zero = Some(Extended::Finite(v));
                speed_total = Extended::Finite(v).checked_add(away);
            }
            NearZero::Undecided => {}
        }
    }
    evidence.push(flag("critical_exponent", critical));

    let verdict = if !assumptions_ok {
        Verdict::NotApplicable
    } else {
        match speed_total {
            Some(Extended::PosInfinity) => Verdict::Synchronizes,
            Some(Extended::Finite(_)) => Verdict::Ergodic,
            _ => Verdict::Critical,
        }
    };
    Ok(SyncVerdict {
        verdict,
        speed_total,
        assumptions_ok,
        violated,
        speed_near_zero,
        critical,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E2: f64 = 7.38905609893065;

    fn geometric(kappa: f64) -> DiffusionSpec<f64> {
        DiffusionSpec::new(f64::INFINITY, move |x| kappa * x, |x| x, 1.0, "geometric").unwrap()
    }

    fn logistic() -> DiffusionSpec<f64> {
        DiffusionSpec::new(f64::INFINITY, |x: f64| x * (1.0 - x), |x| x, 1.0, "logistic").unwrap()
    }

    fn sqrt_noise() -> DiffusionSpec<f64> {
        DiffusionSpec::new(f64::INFINITY, |_| 0.0, |x: f64| x.sqrt(), 1.0, "sqrt").unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn scale_density_examples() {
        assert!(close(scale_density(&geometric(0.25), 4.0).unwrap(), 0.5, 1e-10));
        assert!(close(scale_density(&logistic(), 1.0).unwrap(), 1.0, 1e-14));
        assert!(close(scale_density(&sqrt_noise(), 3.3).unwrap(), 1.0, 1e-14));
        assert!(scale_density(&logistic(), -1.0).is_err());
    }

    #[test]
    fn scale_function_examples() {
        assert!(close(scale_function(&geometric(0.25), 4.0).unwrap(), 2.0, 1e-9));
        assert_eq!(scale_function(&geometric(0.25), 1.0).unwrap(), 0.0);
        assert_eq!(scale_limit(&logistic(), Boundary::Zero).unwrap(), Extended::NegInfinity);
        let s0 = scale_limit(&geometric(0.25), Boundary::Zero).unwrap().finite().unwrap();
        assert!(close(s0, -2.0, 1e-8));
    }

    #[test]
    fn speed_examples() {
        assert!(close(speed_density(&geometric(0.25), 1.0).unwrap(), 2.0, 1e-12));
        assert!(close(speed_density(&logistic(), 2.0).unwrap(), 2.0 * (-2f64).exp(), 1e-9));
        let total = speed_mass(&logistic(), 0.0, f64::INFINITY).unwrap().finite().unwrap();
        assert!((total - E2).abs() < 1e-5);
        assert_eq!(speed_mass(&geometric(0.25), 0.0, 1.0).unwrap(), Extended::PosInfinity);
        assert!(speed_mass(&geometric(0.25), 1.0, f64::INFINITY).unwrap().is_finite());
    }

    #[test]
    fn boundary_examples() {
        assert!(boundary_classify(&sqrt_noise(), Boundary::Zero).unwrap().accessible);
        assert!(!boundary_classify(&logistic(), Boundary::Zero).unwrap().accessible);
        let g = boundary_classify(&geometric(0.25), Boundary::Zero).unwrap();
        assert!(!g.accessible);
        assert!((g.feller_exponent.unwrap() + 1.0).abs() < 1e-4);
    }

    #[test]
    fn verdict_examples() {
        let g = synchronization_verdict(&geometric(0.25)).unwrap();
        assert_eq!(g.verdict, Verdict::Synchronizes);
        assert!(g.assumptions_ok);
        let l = synchronization_verdict(&logistic()).unwrap();
        assert_eq!(l.verdict, Verdict::Ergodic);
        assert!((l.speed_total.unwrap().finite().unwrap() - E2).abs() < 1e-5);
        let s = synchronization_verdict(&sqrt_noise()).unwrap();
        assert_eq!(s.verdict, Verdict::NotApplicable);
        assert!(s.violated.iter().any(|v| v.contains("boundary 0")));
    }

    #[test]
    fn exact_critical_exponent_is_decisive() {
        // Speed density 2e^{2-2x}/x: exponent exactly -1 at 0, finite mass at infinity.
        let spec = DiffusionSpec::new(f64::INFINITY, |x: f64| 0.5 * x - x * x, |x| x, 1.0, "crit").unwrap();
        let v = synchronization_verdict(&spec).unwrap();
        assert_eq!(v.verdict, Verdict::Synchronizes);
        assert!(v.critical);
    }

    #[test]
    fn near_critical_exponent_is_undecided() {
        let kappa = 0.5 + 2e-5;
        let spec = DiffusionSpec::new(f64::INFINITY, move |x: f64| kappa * x - x * x, |x| x, 1.0, "near").unwrap();
        let v = synchronization_verdict(&spec).unwrap();
        assert_eq!(v.verdict, Verdict::Critical);
        assert_eq!(v.speed_total, None);
    }
}
