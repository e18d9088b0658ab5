use crate::real::Real;

use super::endpoint::{endpoint_exponent, Behavior, EndpointAnalysis, Side, Window, FIT_TOLERANCE};
use super::NumericsError;

/// An endpoint exponent at or below `-1 + DIVERGENCE_MARGIN` counts as non-integrable.
pub const DIVERGENCE_MARGIN: f64 = 1e-4;

const MAX_PANELS: usize = 2000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// A real function that can also report its logarithm.
///
/// Implement `ln_eval` directly when `f` can overflow while `ln f` stays representable.
pub trait Integrand<T: Real> {
    fn eval(&self, x: T) -> T;

    /// `ln f(x)`: `-inf` where `f` vanishes, NaN where it is negative or undefined.
    fn ln_eval(&self, x: T) -> T {
        let v = self.eval(x);
        if v > T::zero() {
            v.ln()
        } else if v == T::zero() {
            T::neg_infinity()
        } else {
            T::nan()
        }
    }
}

impl<T: Real, F: Fn(T) -> T> Integrand<T> for F {
    fn eval(&self, x: T) -> T {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Integral<T> {
    Value(Estimate<T>),
    /// The integral is infinite; carries the analysis of the offending endpoint.
    Divergent(EndpointAnalysis<T>),
}

impl<T: Real> Integral<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Integral::Value(e) => Some(e.value),
            Integral::Divergent(_) => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Integral::Divergent(_))
    }
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    resabs: T,
}

fn gk21<T: Real, F: Fn(T) -> T + ?Sized>(f: &F, a: T, b: T) -> Panel<T> {
    let center = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let fc = f(center);
    let mut resg = T::zero();
    let mut resk = T::lit(WGK[10]) * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        resk = resk + w * (f1 + f2);
        resabs = resabs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg = resg + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let reskh = resk * T::lit(0.5);
    let mut resasc = T::lit(WGK[10]) * (fc - reskh).abs();
    for j in 0..10 {
        resasc = resasc + T::lit(WGK[j]) * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != T::zero() && error != T::zero() {
        error = resasc * T::one().min((T::lit(200.0) * error / resasc).powf(T::lit(1.5)));
    }
    let floor = T::lit(50.0) * T::epsilon() * resabs;
    if resabs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) {
        error = error.max(floor);
    }
    Panel {
        a,
        b,
        value,
        error,
        resabs,
    }
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss10<T: Real, F: Fn(T) -> T + ?Sized>(f: &F, a: T, b: T) -> T {
    let center = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let mut sum = T::zero();
    for (k, j) in (1..10).step_by(2).enumerate() {
        let dx = half * T::lit(XGK[j]);
        sum = sum + T::lit(WG[k]) * (f(center - dx) + f(center + dx));
    }
    sum * half
}

/// Globally adaptive 21-point Gauss–Kronrod quadrature of a function that is finite on `[a, b]`.
///
/// Converges when the summed error estimate is below `tol * |value|`, or at the round-off floor.
pub fn integrate_regular<T, F>(f: &F, a: T, b: T, tol: T) -> Result<Estimate<T>, NumericsError>
where
    T: Real,
    F: Fn(T) -> T + ?Sized,
{
    integrate_limited(f, a, b, tol, MAX_PANELS)
}

/// [`integrate_regular`] with a caller-chosen cap on the number of panels.
pub(crate) fn integrate_limited<T, F>(
    f: &F,
    a: T,
    b: T,
    tol: T,
    max_panels: usize,
) -> Result<Estimate<T>, NumericsError>
where
    T: Real,
    F: Fn(T) -> T + ?Sized,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(NumericsError::Domain(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        });
    }
    let mut panels = vec![gk21(f, a, b)];
    let mut evaluations = 21;
    loop {
        let value = panels.iter().fold(T::zero(), |s, p| s + p.value);
        let error = panels.iter().fold(T::zero(), |s, p| s + p.error);
        let resabs = panels.iter().fold(T::zero(), |s, p| s + p.resabs);
        if !value.is_finite() || !error.is_finite() {
            return Err(NumericsError::NonConvergence {
                a: a.as_f64(),
                b: b.as_f64(),
                estimate: value.as_f64(),
                error: error.as_f64(),
            });
        }
        let roundoff = T::lit(100.0) * T::epsilon() * resabs;
        if error <= tol * value.abs() || error <= roundoff {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(k, e), (i, p)| if p.error > e { (i, p.error) } else { (k, e) });
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if panels.len() + 2 > max_panels || !(mid > p.a && mid < p.b) {
            return Err(NumericsError::NonConvergence {
                a: a.as_f64(),
                b: b.as_f64(),
                estimate: value.as_f64(),
                error: error.as_f64(),
            });
        }
        panels.push(gk21(f, p.a, mid));
        panels.push(gk21(f, mid, p.b));
        evaluations += 42;
    }
}

fn confidently_divergent<T: Real>(e: &EndpointAnalysis<T>) -> bool {
    match e.behavior {
        Behavior::SuperAlgebraicGrowth => true,
        Behavior::SuperAlgebraicDecay => false,
        Behavior::PowerLaw => {
            e.exponent <= T::lit(-1.0 + DIVERGENCE_MARGIN) && e.fit_residual < T::lit(FIT_TOLERANCE)
        }
    }
}

/// `f(1/t) / t^2`, the integrand after `x = 1/t`.
pub(crate) struct Inverted<'a, F: ?Sized>(pub(crate) &'a F);

impl<T: Real, F: Integrand<T> + ?Sized> Integrand<T> for Inverted<'_, F> {
    fn eval(&self, t: T) -> T {
        self.ln_eval(t).exp()
    }

    fn ln_eval(&self, t: T) -> T {
        self.0.ln_eval(t.recip()) - T::lit(2.0) * t.ln()
    }
}

/// Integral of `f` over the open interval `(a, b)`, allowing integrable power-law or faster
/// singularities at either end and `b = +inf`.
///
/// Each end is analysed with [`endpoint_exponent`]; a non-integrable exponent yields
/// [`Integral::Divergent`]. Otherwise the two halves are integrated in logarithmic distance
/// from their endpoint, and the innermost sliver is added from the fitted power law.
pub fn integrate_adaptive<T, F>(f: &F, a: T, b: T, tol: T) -> Result<Integral<T>, NumericsError>
where
    T: Real,
    F: Integrand<T> + ?Sized,
{
    if !a.is_finite() || a.is_nan() || b.is_nan() || b <= a || !(tol > T::zero()) {
        return Err(NumericsError::Domain(format!("invalid integration request ({a}, {b}), tol {tol}")));
    }
    if b == T::infinity() {
        let split = if a > T::zero() { a } else { T::one() };
        let tail = finite(&Inverted(f), T::zero(), split.recip(), tol)?;
        if a >= split {
            return Ok(tail);
        }
        let head = finite(f, a, split, tol)?;
        return Ok(combine(head, tail));
    }
    finite(f, a, b, tol)
}

fn combine<T: Real>(x: Integral<T>, y: Integral<T>) -> Integral<T> {
    match (x, y) {
        (Integral::Divergent(e), _) | (_, Integral::Divergent(e)) => Integral::Divergent(e),
        (Integral::Value(p), Integral::Value(q)) => Integral::Value(Estimate {
            value: p.value + q.value,
            error: p.error + q.error,
            evaluations: p.evaluations + q.evaluations,
        }),
    }
}

fn finite<T, F>(f: &F, a: T, b: T, tol: T) -> Result<Integral<T>, NumericsError>
where
    T: Real,
    F: Integrand<T> + ?Sized,
{
    let window = Window::relative_to(b - a);
    let lower = endpoint_exponent(f, a, Side::Above, window);
    let upper = endpoint_exponent(f, b, Side::Below, window);
    for e in [&lower, &upper].into_iter().flatten() {
        if confidently_divergent(e) {
            return Ok(Integral::Divergent(e.clone()));
        }
    }
    let (lower, upper) = match (lower, upper) {
        (Ok(l), Ok(u)) => (l, u),
        // Sign-changing or irregular integrands: try plain quadrature once.
        (l, u) => {
            let g = |x: T| f.eval(x);
            return integrate_regular(&g, a, b, tol).map(Integral::Value).map_err(|err| {
                match l.err().or(u.err()) {
                    Some(fit) if !matches!(err, NumericsError::Domain(_)) => fit,
                    _ => err,
                }
            });
        }
    };
    let mid = (a + b) * T::lit(0.5);
    let half_tol = tol * T::lit(0.5);
    let mut total = Estimate {
        value: T::zero(),
        error: T::zero(),
        evaluations: 2 * super::endpoint::DEFAULT_SAMPLES,
    };
    for (analysis, sign) in [(&lower, T::one()), (&upper, -T::one())] {
        let end = analysis.endpoint;
        let ln_f = |d: T| f.ln_eval(end + sign * d);
        let (inner, evals) = inner_cut(analysis, &ln_f, window, b - a, tol);
        let g = |u: T| (ln_f(u.exp()) + u).exp();
        let outer = (mid - end).abs().ln();
        // `end ± δ` carries relative error `eps·|end|/δ` in δ, so below `clean` the integrand is
        // only known to that accuracy and is integrated at the matching tolerance.
        let clean = T::epsilon() * end.abs() / half_tol;
        let body = if clean > inner {
            let split = clean.ln().min(outer);
            let near_tol = (T::epsilon() * end.abs() / inner).max(half_tol);
            let near = integrate_regular(&g, inner.ln(), split, near_tol)?;
            let far = integrate_regular(&g, split, outer, half_tol)?;
            Estimate {
                value: near.value + far.value,
                error: near.error + far.error,
                evaluations: near.evaluations + far.evaluations,
            }
        } else {
            integrate_regular(&g, inner.ln(), outer, half_tol)?
        };
        let sliver = match analysis.behavior {
            Behavior::PowerLaw => (ln_f(inner) + inner.ln()).exp() / (analysis.exponent + T::one()),
            _ => T::zero(),
        };
        total.value = total.value + body.value + sliver;
        total.error = total.error + body.error + sliver.abs() * (inner / window.far + T::lit(1e-9));
        total.evaluations += body.evaluations + evals;
    }
    if !total.value.is_finite() {
        return Err(NumericsError::NonConvergence {
            a: a.as_f64(),
            b: b.as_f64(),
            estimate: total.value.as_f64(),
            error: total.error.as_f64(),
        });
    }
    Ok(Integral::Value(total))
}

/// Distance from the endpoint below which the fitted power law replaces quadrature.
///
/// Starts at the fit window's near edge and moves toward the endpoint by decades while the
/// power-law remainder `f(δ)·δ/(p+1)` is not negligible at relative accuracy `tol`, stopping where `end ± δ`
/// is no longer resolvable.
fn inner_cut<T, G>(analysis: &EndpointAnalysis<T>, ln_f: &G, window: Window<T>, length: T, tol: T) -> (T, usize)
where
    T: Real,
    G: Fn(T) -> T,
{
    let end = analysis.endpoint;
    let floor = if end == T::zero() {
        T::min_positive_value().sqrt() * length
    } else {
        T::lit(1e3) * T::epsilon() * end.abs()
    };
    let mut inner = window.near;
    let mut evals = 0;
    if analysis.behavior != Behavior::PowerLaw || floor >= inner {
        return (inner, evals);
    }
    // Relative to the window's outer contribution, which understates endpoint-dominated integrals.
    let ln_target = (T::lit(1e-3) * tol).ln() + ln_f(window.far) + window.far.ln();
    if !ln_target.is_finite() {
        return (inner, evals);
    }
    let ln_p1 = (analysis.exponent + T::one()).ln();
    let decade = T::lit(10.0);
    loop {
        let remainder = ln_f(inner) + inner.ln() - ln_p1;
        evals += 1;
        if !(remainder > ln_target) || !remainder.is_finite() || inner / decade < floor {
            return (inner, evals);
        }
        inner = inner / decade;
    }
}
