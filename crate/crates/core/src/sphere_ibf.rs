//! Isotropic Brownian flows on `S^{d-1}` given by Gegenbauer coefficient sequences `{a_l}`
//! (gradient part) and `{b_l}` (solenoidal part), and their two-point distance diffusion on
//! `(0, π)`.
//!
//! With `γ_l = C^{d/2}_{l-1}/C^{d/2}_{l-1}(1)`:
//! `α(x) = Σ a_l γ_l + Σ b_l (x γ_l - (1-x²)/(d-2) γ_l')`,
//! `β(x) = Σ a_l γ_l' + Σ b_l (-γ_l - x/(d-2) γ_l')`,
//! `σ²(r) = 2[α(1) - α(cos r) cos r + β(cos r) sin² r]`,
//! `b(r) = (d-2)/sin r · (α(1) cos r - α(cos r))`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gegenbauer_ratio, gegenbauer_ratio_taylor, Order};
use crate::real::Real;
use crate::scalar_diffusion::{synchronization_verdict, DiffusionSpec, SyncVerdict, CRITICAL_BAND};

/// Largest supported coefficient index `l`.
pub const MAX_INDEX: usize = 64;
/// Number of interior points on which `σ² > 0` is checked.
pub const DEGENERACY_GRID: usize = 10_000;
const DENOMINATOR_FLOOR: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
const FD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereModel<T> {
    d: usize,
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> SphereModel<T> {
    /// `a[0]` and `b[0]` are the `l = 1` coefficients.
    pub fn new(d: usize, a: Vec<T>, b: Vec<T>) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidModel(format!("dimension d = {d} must be at least 3")));
        }
        if a.len().max(b.len()) > MAX_INDEX {
            return Err(Error::InvalidModel(format!("at most {MAX_INDEX} coefficients per series")));
        }
        if let Some(c) = a.iter().chain(&b).find(|c| !(c.is_finite() && **c >= T::zero())) {
            return Err(Error::InvalidModel(format!("coefficient {c} is not a finite nonnegative number")));
        }
        if !a.iter().chain(&b).any(|c| *c > T::zero()) {
            return Err(Error::InvalidModel("all coefficients are zero".into()));
        }
        Ok(SphereModel { d, a, b })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn gradient_coeffs(&self) -> &[T] {
        &self.a
    }

    pub fn solenoidal_coeffs(&self) -> &[T] {
        &self.b
    }

    fn terms(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    fn a_l(&self, l: usize) -> T {
        self.a.get(l - 1).copied().unwrap_or_else(T::zero)
    }

    fn b_l(&self, l: usize) -> T {
        self.b.get(l - 1).copied().unwrap_or_else(T::zero)
    }

    fn dm2(&self) -> T {
        T::from_usize_lossy(self.d - 2)
    }

    pub fn describe(&self) -> String {
        let list = |v: &[T]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        format!("sphere d={} a=[{}] b=[{}]", self.d, list(&self.a), list(&self.b))
    }

    /// `α(1) + α(-1) = 2 Σ_{l odd} a_l + 2 Σ_{l even} b_l`; zero iff `σ²(π) = 0`.
    pub fn antipodal_sum(&self) -> T {
        let mut s = T::zero();
        for l in 1..=self.terms() {
            s = s + if l % 2 == 1 { self.a_l(l) } else { self.b_l(l) };
        }
        T::lit(2.0) * s
    }

    /// The flow commutes with the antipodal map: `σ²(π) = 0`, so the distance can approach π.
    pub fn is_antipodally_symmetric(&self) -> bool {
        self.antipodal_sum() == T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCoefficients<T> {
    pub alpha1: T,
    pub alpha1_prime: T,
    pub beta1: T,
}

impl<T: Real> BoundaryCoefficients<T> {
    /// `α'(1) + α(1) + 2β(1)`, the leading coefficient of `σ²(r)/r²` at 0.
    pub fn denominator(&self) -> T {
        self.alpha1_prime + self.alpha1 + T::lit(2.0) * self.beta1
    }
}

fn ratio<T: Real>(d: usize, l: usize, x: T, order: Order) -> T {
    gegenbauer_ratio(d, l, x, order).expect("validated d and l")
}

/// `(α(x), β(x))` by term-wise summation.
pub fn alpha_beta<T: Real>(model: &SphereModel<T>, x: T) -> Result<(T, T)> {
    if !(x > -T::one() && x <= T::one()) {
        return Err(Error::InvalidInput(format!("x = {x} outside (-1, 1]")));
    }
    Ok(alpha_beta_unchecked(model, x))
}

fn alpha_beta_unchecked<T: Real>(model: &SphereModel<T>, x: T) -> (T, T) {
    let d = model.d;
    let dm2 = model.dm2();
    let (mut alpha, mut beta) = (T::zero(), T::zero());
    for l in 1..=model.terms() {
        let g = ratio(d, l, x, Order::Value);
        let gp = ratio(d, l, x, Order::First);
        let (a, b) = (model.a_l(l), model.b_l(l));
        alpha = alpha + a * g + b * (x * g - (T::one() - x * x) / dm2 * gp);
        beta = beta + a * gp + b * (-g - x / dm2 * gp);
    }
    (alpha, beta)
}

/// `α(1)`, `α'(1)` and `β(1)`; `α'(1)` is computed term-wise and checked against a central
/// difference of the series.
pub fn boundary_coefficients<T: Real>(model: &SphereModel<T>) -> Result<BoundaryCoefficients<T>> {
    let d = model.d;
    let dm2 = model.dm2();
    let (mut alpha1, mut alpha1_prime, mut beta1) = (T::zero(), T::zero(), T::zero());
    for l in 1..=model.terms() {
        let gp = ratio(d, l, T::one(), Order::First);
        let (a, b) = (model.a_l(l), model.b_l(l));
        alpha1 = alpha1 + a + b;
        alpha1_prime = alpha1_prime + a * gp + b * (T::one() + gp + T::lit(2.0) * gp / dm2);
        beta1 = beta1 + a * gp + b * (-T::one() - gp / dm2);
    }

    let m64 = SphereModel {
        d,
        a: model.a.iter().map(|c| c.as_f64()).collect(),
        b: model.b.iter().map(|c| c.as_f64()).collect(),
    };
    let h = FD_STEP;
    let f = |x: f64| alpha_beta_unchecked(&m64, x).0;
    let fd = (-f(1.0 + 2.0 * h) + 8.0 * f(1.0 + h) - 8.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (12.0 * h);
    let analytic = alpha1_prime.as_f64();
    if (fd - analytic).abs() > FD_TOLERANCE * analytic.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "α'(1): term-wise {analytic} vs finite difference {fd}"
        )));
    }
    Ok(BoundaryCoefficients {
        alpha1,
        alpha1_prime,
        beta1,
    })
}

/// `λ_n = (d-2n-1)/2 α'(1) - (d-1)/2 α(1) - n β(1)`, `n = 1..d-1`.
pub fn lyapunov_spectrum<T: Real>(model: &SphereModel<T>) -> Result<Vec<T>> {
    let c = boundary_coefficients(model)?;
    Ok(spectrum_from(model.d, &c))
}

fn spectrum_from<T: Real>(d: usize, c: &BoundaryCoefficients<T>) -> Vec<T> {
    let half = T::lit(0.5);
    let df = T::from_usize_lossy(d);
    (1..d)
        .map(|n| {
            let nf = T::from_usize_lossy(n);
            (df - T::lit(2.0) * nf - T::one()) * half * c.alpha1_prime
                - (df - T::one()) * half * c.alpha1
                - nf * c.beta1
        })
        .collect()
}

/// `γ₁ = (d-2)(α'(1) - α(1)) / (α'(1) + α(1) + 2β(1))`, the exponent of `s'(r) ~ r^{-γ₁}` at 0.
pub fn gamma1<T: Real>(model: &SphereModel<T>) -> Result<T> {
    let c = boundary_coefficients(model)?;
    gamma1_from(model, &c)
}

fn gamma1_from<T: Real>(model: &SphereModel<T>, c: &BoundaryCoefficients<T>) -> Result<T> {
    let den = c.denominator();
    if den <= T::lit(DENOMINATOR_FLOOR) {
        return Err(Error::DegenerateModel(format!(
            "{}: α'(1) + α(1) + 2β(1) = {den} ≤ {DENOMINATOR_FLOOR}",
            model.describe()
        )));
    }
    Ok(model.dm2() * (c.alpha1_prime - c.alpha1) / den)
}

fn horner<T: Real>(c: &[T], u: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &k| acc * u + k)
}

/// `acc += factor * u^shift * p`.
fn add_shifted<T: Real>(acc: &mut Vec<T>, p: &[T], factor: T, shift: usize) {
    if acc.len() < p.len() + shift {
        acc.resize(p.len() + shift, T::zero());
    }
    for (j, &c) in p.iter().enumerate() {
        acc[j + shift] = acc[j + shift] + factor * c;
    }
}

/// Distance coefficients, evaluated without cancellation near both ends.
///
/// Near `r = 0` (`u = 1 - cos r`) and `r = π` (`v = 1 + cos r`) the combinations
/// `σ²/2` and `α(1) cos r - α(cos r)` are expanded as exact polynomials in `u` or `v`
/// with the constant terms fixed analytically.
struct Coefficients<T> {
    d: usize,
    a: Vec<T>,
    b: Vec<T>,
    nu: T,
    norms: Vec<T>,
    alpha1: T,
    half_var0: Vec<T>,
    numer0: Vec<T>,
    half_var_pi: Vec<T>,
    numer_pi: Vec<T>,
    switch: T,
}

impl<T: Real> Coefficients<T> {
    fn new(model: &SphereModel<T>) -> Self {
        let d = model.d;
        let l_max = model.terms();
        let dm2 = model.dm2();
        let inv = T::one() / dm2;
        let nu = T::from_usize_lossy(d) * T::lit(0.5);
        let a: Vec<T> = (1..=l_max).map(|l| model.a_l(l)).collect();
        let b: Vec<T> = (1..=l_max).map(|l| model.b_l(l)).collect();
        let alpha1 = a.iter().chain(&b).fold(T::zero(), |s, &c| s + c);

        let (mut big_a, mut big_b) = (Vec::new(), Vec::new());
        let (mut api, mut bpi) = (Vec::new(), Vec::new());
        let mut max_slope = T::zero();
        for l in 1..=l_max {
            let t: Vec<T> = gegenbauer_ratio_taylor(d, l).expect("validated d and l");
            let alt = |k: usize| if k.is_multiple_of(2) { T::one() } else { -T::one() };
            let g: Vec<T> = t.iter().enumerate().map(|(k, &c)| c * alt(k)).collect();
            let gd: Vec<T> = (0..t.len().saturating_sub(1))
                .map(|j| T::from_usize_lossy(j + 1) * t[j + 1] * alt(j))
                .collect();
            let parity = alt(l - 1);
            let gpi: Vec<T> = g.iter().map(|&c| parity * c).collect();
            let gdpi: Vec<T> = gd.iter().map(|&c| -parity * c).collect();
            if t.len() > 1 {
                max_slope = max_slope.max(t[1]);
            }
            let (al, bl) = (a[l - 1], b[l - 1]);

            add_shifted(&mut big_a, &g, al, 0);
            add_shifted(&mut big_a, &g, bl, 0);
            add_shifted(&mut big_a, &g, -bl, 1);
            add_shifted(&mut big_a, &gd, -T::lit(2.0) * inv * bl, 1);
            add_shifted(&mut big_a, &gd, inv * bl, 2);
            add_shifted(&mut big_b, &gd, al, 0);
            add_shifted(&mut big_b, &g, -bl, 0);
            add_shifted(&mut big_b, &gd, -inv * bl, 0);
            add_shifted(&mut big_b, &gd, inv * bl, 1);

            add_shifted(&mut api, &gpi, al, 0);
            add_shifted(&mut api, &gpi, -bl, 0);
            add_shifted(&mut api, &gpi, bl, 1);
            add_shifted(&mut api, &gdpi, -T::lit(2.0) * inv * bl, 1);
            add_shifted(&mut api, &gdpi, inv * bl, 2);
            add_shifted(&mut bpi, &gdpi, al, 0);
            add_shifted(&mut bpi, &gpi, -bl, 0);
            add_shifted(&mut bpi, &gdpi, inv * bl, 0);
            add_shifted(&mut bpi, &gdpi, -inv * bl, 1);
        }
        let at = |p: &Vec<T>, j: isize| if j < 0 { T::zero() } else { p.get(j as usize).copied().unwrap_or_else(T::zero) };
        let len = big_a.len().max(big_b.len() + 2);

        let mut half_var0 = vec![T::zero(); len];
        let mut numer0 = vec![T::zero(); len];
        let mut half_var_pi = vec![T::zero(); len];
        let mut numer_pi = vec![T::zero(); len];
        for j in 0..len {
            let ji = j as isize;
            half_var0[j] = -at(&big_a, ji) + at(&big_a, ji - 1) + T::lit(2.0) * at(&big_b, ji - 1) - at(&big_b, ji - 2);
            numer0[j] = -at(&big_a, ji);
            half_var_pi[j] = at(&api, ji) - at(&api, ji - 1) + T::lit(2.0) * at(&bpi, ji - 1) - at(&bpi, ji - 2);
            numer_pi[j] = -at(&api, ji);
        }
        half_var0[0] = T::zero();
        numer0[0] = T::zero();
        numer0[1] = numer0[1] - alpha1;
        half_var_pi[0] = model.antipodal_sum();
        numer_pi[0] = -half_var_pi[0];
        numer_pi[1] = numer_pi[1] + alpha1;

        let norms = (0..l_max).map(|n| crate::numerics::gegenbauer_at_one(nu, n).expect("nu > 0")).collect();
        let switch = T::lit(0.05).min(T::lit(0.05) / (T::one() + max_slope));
        Coefficients {
            d,
            a,
            b,
            nu,
            norms,
            alpha1,
            half_var0,
            numer0,
            half_var_pi,
            numer_pi,
            switch,
        }
    }

    /// `(α(x), β(x))` from one pass of the recurrences for `C^ν` and `C^{ν+1}`.
    fn direct(&self, x: T) -> (T, T) {
        let two = T::lit(2.0);
        let dm2 = T::from_usize_lossy(self.d - 2);
        let nu1 = self.nu + T::one();
        let (mut c_prev, mut c_cur) = (T::zero(), T::one());
        let (mut e_prev, mut e_cur) = (T::zero(), T::one());
        let (mut alpha, mut beta) = (T::zero(), T::zero());
        for (idx, norm) in self.norms.iter().enumerate() {
            let n = idx;
            if n >= 1 {
                let nf = T::from_usize_lossy(n);
                let next = if n == 1 {
                    two * self.nu * x
                } else {
                    (two * x * (nf + self.nu - T::one()) * c_cur - (nf + two * self.nu - two) * c_prev) / nf
                };
                c_prev = c_cur;
                c_cur = next;
            }
            if n >= 2 {
                let m = n - 1;
                let mf = T::from_usize_lossy(m);
                let next = if m == 1 {
                    two * nu1 * x
                } else {
                    (two * x * (mf + nu1 - T::one()) * e_cur - (mf + two * nu1 - two) * e_prev) / mf
                };
                e_prev = e_cur;
                e_cur = next;
            }
            let g = c_cur / *norm;
            let gp = if n == 0 { T::zero() } else { two * self.nu * e_cur / *norm };
            let (al, bl) = (self.a[idx], self.b[idx]);
            alpha = alpha + al * g + bl * (x * g - (T::one() - x * x) / dm2 * gp);
            beta = beta + al * gp + bl * (-g - x / dm2 * gp);
        }
        (alpha, beta)
    }

    /// `σ²(r)/2` and `α(1) cos r - α(cos r)`.
    fn evaluate(&self, r: T) -> (T, T) {
        let half = r * T::lit(0.5);
        let u = T::lit(2.0) * half.sin().powi(2);
        let v = T::lit(2.0) * half.cos().powi(2);
        if u <= self.switch {
            (horner(&self.half_var0, u), horner(&self.numer0, u))
        } else if v <= self.switch {
            (horner(&self.half_var_pi, v), horner(&self.numer_pi, v))
        } else {
            let x = r.cos();
            let s2 = r.sin().powi(2);
            let (alpha, beta) = self.direct(x);
            (self.alpha1 - alpha * x + beta * s2, self.alpha1 * x - alpha)
        }
    }

    fn variance(&self, r: T) -> T {
        T::lit(2.0) * self.evaluate(r).0
    }

    fn drift(&self, r: T) -> T {
        T::from_usize_lossy(self.d - 2) * self.evaluate(r).1 / r.sin()
    }
}

/// Distance diffusion on `(0, π)` with reference point `π/2`.
pub fn distance_diffusion<T: Real>(model: &SphereModel<T>) -> Result<DiffusionSpec<T>> {
    let coeffs = Arc::new(Coefficients::new(model));
    let pi = T::PI();
    let mut bad = Vec::new();
    for k in 1..=DEGENERACY_GRID {
        let r = pi * T::from_usize_lossy(k) / T::from_usize_lossy(DEGENERACY_GRID + 1);
        let hv = coeffs.evaluate(r).0;
        if !(hv > T::lit(1e-9) * coeffs.alpha1 * r.sin().powi(2)) {
            bad.push(r);
        }
    }
    if bad.len() == DEGENERACY_GRID {
        return Err(Error::DegenerateModel(format!("{}: σ² ≡ 0 on (0, π)", model.describe())));
    }
    if let Some(r) = bad.first() {
        return Err(Error::DegenerateModel(format!(
            "{}: σ² vanishes at r = {r} ({} of {DEGENERACY_GRID} grid points)",
            model.describe(),
            bad.len()
        )));
    }
    let (cd, cv) = (coeffs.clone(), coeffs);
    DiffusionSpec::from_variance(
        pi,
        move |r| cd.drift(r),
        move |r| cv.variance(r),
        pi * T::lit(0.5),
        model.describe(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereReport<T: Real> {
    pub model: SphereModel<T>,
    #[serde(flatten)]
    pub boundary: BoundaryCoefficients<T>,
    pub spectrum: Vec<T>,
    pub lambda1: T,
    pub gamma1: T,
    /// Analytic prediction `λ₁ ≤ 0`.
    pub predicts_synchronization: bool,
    /// `σ²(π) = 0`: the distance diffusion does not meet the standing assumptions at π.
    pub antipodally_symmetric: bool,
    pub verdict: SyncVerdict<T>,
}

/// Spectrum, `γ₁` and the numeric verdict for the distance diffusion.
///
/// Infinite speed mass near 0 must agree with `λ₁ ≤ 0` unless `|2λ₁/D|` lies in the critical
/// band; disagreement is a [`Error::Consistency`].
pub fn classify<T: Real>(model: &SphereModel<T>) -> Result<SphereReport<T>> {
    let spec = distance_diffusion(model)?;
    let boundary = boundary_coefficients(model)?;
    let gamma1 = gamma1_from(model, &boundary)?;
    let spectrum = spectrum_from(model.d, &boundary);
    let lambda1 = spectrum[0];
    let verdict = synchronization_verdict(&spec)?;

    let scale = boundary.alpha1_prime.abs() + boundary.alpha1.abs() + boundary.beta1.abs();
    let predicts = lambda1 <= T::lit(1e-9) * scale;
    let band = (T::lit(2.0) * lambda1 / boundary.denominator()).abs() < T::lit(CRITICAL_BAND);
    if let (Some(near), false) = (verdict.speed_near_zero, band) {
        if near.is_finite() == predicts {
            return Err(Error::Consistency(format!(
                "{}: λ₁ = {lambda1} but speed mass near 0 is {near}",
                model.describe()
            )));
        }
    }
    Ok(SphereReport {
        model: model.clone(),
        boundary,
        spectrum,
        lambda1,
        gamma1,
        predicts_synchronization: predicts,
        antipodally_symmetric: model.is_antipodally_symmetric(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(d: usize, a: &[f64], b: &[f64]) -> SphereModel<f64> {
        SphereModel::new(d, a.to_vec(), b.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_beta_examples() {
        let (al, be) = alpha_beta(&m(3, &[0.0, 1.0], &[]), 0.4).unwrap();
        assert!(close(al, 0.4, 1e-15) && close(be, 1.0, 1e-15));
        let (al, be) = alpha_beta(&m(3, &[], &[1.0]), 0.0).unwrap();
        assert!(close(al, 0.0, 1e-15) && close(be, -1.0, 1e-15));
        let (al, be) = alpha_beta(&m(3, &[0.0, 0.5], &[0.0, 1.0]), 1.0).unwrap();
        assert!(close(al, 1.5, 1e-14) && close(be, -1.5, 1e-14));
        assert!(alpha_beta(&m(3, &[1.0], &[]), -1.0).is_err());
    }

    #[test]
    fn boundary_coefficient_examples() {
        let c = boundary_coefficients(&m(3, &[0.0, 1.0], &[])).unwrap();
        assert_eq!((c.alpha1, c.alpha1_prime, c.beta1), (1.0, 1.0, 1.0));
        let c = boundary_coefficients(&m(3, &[], &[1.0])).unwrap();
        assert_eq!((c.alpha1, c.alpha1_prime, c.beta1), (1.0, 1.0, -1.0));
        let c = boundary_coefficients(&m(3, &[0.0, 0.5], &[0.0, 1.0])).unwrap();
        assert!(close(c.alpha1, 1.5, 1e-14) && close(c.alpha1_prime, 4.5, 1e-14) && close(c.beta1, -1.5, 1e-14));
    }

    #[test]
    fn spectrum_and_gamma1_examples() {
        assert_eq!(lyapunov_spectrum(&m(3, &[0.0, 1.0], &[])).unwrap(), vec![-2.0, -4.0]);
        let s = lyapunov_spectrum(&m(3, &[0.0, 0.5], &[0.0, 1.0])).unwrap();
        assert!(close(s[0], 0.0, 1e-14) && close(s[1], -3.0, 1e-14));
        // Rigid rotation: λ_2 - λ_1 = -α'(1) - β(1) = 0.
        assert_eq!(lyapunov_spectrum(&m(3, &[], &[1.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(gamma1(&m(3, &[0.0, 1.0], &[])).unwrap(), 0.0);
        assert!(close(gamma1(&m(3, &[0.0, 0.5], &[0.0, 1.0])).unwrap(), 1.0, 1e-14));
        assert!(matches!(gamma1(&m(3, &[], &[1.0])), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn gamma1_in_dimension_four() {
        // Oracle: α(x) = γ_2(x), β = γ_2' with γ_2(x) = x for every d, so α'(1) = α(1) = β(1) = 1.
        let model = m(4, &[0.0, 1.0], &[]);
        let h = 1e-5;
        let f = |x: f64| alpha_beta_unchecked(&model, x).0;
        let ap = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        let (a1, b1) = alpha_beta(&model, 1.0).unwrap();
        let expected = 2.0 * (ap - a1) / (ap + a1 + 2.0 * b1);
        assert!(close(gamma1(&model).unwrap(), expected, 1e-8));
    }

    #[test]
    fn distance_coefficients() {
        let spec = distance_diffusion(&m(3, &[0.0, 1.0], &[])).unwrap();
        for r in [1e-9, 0.01, 0.7, 1.5, 3.0, std::f64::consts::PI - 1e-9] {
            assert!(spec.drift(r).abs() < 1e-12);
            let exact = 4.0 * r.sin().powi(2);
            assert!(close(spec.variance(r), exact, 1e-13 * exact.max(1e-300) + 1e-300), "r={r}");
        }
        let spec = distance_diffusion(&m(3, &[0.0, 0.5], &[0.0, 1.0])).unwrap();
        let r = std::f64::consts::FRAC_PI_2;
        assert!(close(spec.drift(r), 1.0, 1e-13) && close(spec.variance(r), 4.0, 1e-13));
        let err = distance_diffusion(&m(3, &[], &[1.0])).unwrap_err();
        assert!(matches!(&err, Error::DegenerateModel(msg) if msg.contains("σ² ≡ 0")), "{err}");
    }

    #[test]
    fn expansions_match_direct_evaluation() {
        let model = m(5, &[0.3, 0.0, 0.7, 0.2], &[0.1, 0.4, 0.0, 0.6]);
        let c = Coefficients::new(&model);
        for &w in &[1e-3, 1e-2, 0.04] {
            for r in [w, std::f64::consts::PI - w] {
                let x = r.cos();
                let (alpha, beta) = c.direct(x);
                let hv = c.alpha1 - alpha * x + beta * r.sin().powi(2);
                let nm = c.alpha1 * x - alpha;
                let half = r * 0.5;
                let (u, v) = (2.0 * half.sin().powi(2), 2.0 * half.cos().powi(2));
                let p = if r < 1.0 { u } else { v };
                let (hs, ns) = if r < 1.0 { (&c.half_var0, &c.numer0) } else { (&c.half_var_pi, &c.numer_pi) };
                assert!(close(horner(hs, p), hv, 1e-10 * hv.abs().max(1e-3)), "r={r}");
                assert!(close(horner(ns, p), nm, 1e-10 * nm.abs().max(1e-3)), "r={r}");
            }
        }
        let (alpha, beta) = c.direct(0.3);
        let (a2, b2) = alpha_beta(&model, 0.3).unwrap();
        assert!(close(alpha, a2, 1e-14) && close(beta, b2, 1e-14));
    }

    #[test]
    fn log_drift_limit_is_lambda1() {
        for model in [m(3, &[0.0, 1.0], &[]), m(4, &[0.2, 0.5], &[0.3, 0.0, 0.9]), m(5, &[], &[0.0, 1.0, 0.5])] {
            let spec = distance_diffusion(&model).unwrap();
            let l1 = lyapunov_spectrum(&model).unwrap()[0];
            assert!(close(spec.log_drift(1e-4), l1, 1e-3), "{}", model.describe());
        }
    }

    #[test]
    fn classify_examples() {
        let crit = classify(&m(3, &[0.0, 0.5], &[0.0, 1.0])).unwrap();
        assert!(close(crit.lambda1, 0.0, 1e-14) && close(crit.gamma1, 1.0, 1e-14));
        assert_eq!(crit.verdict.verdict, crate::scalar_diffusion::Verdict::Synchronizes);
        assert!(crit.verdict.critical);
        let erg = classify(&m(3, &[], &[0.0, 1.0])).unwrap();
        assert!(close(erg.lambda1, 1.0, 1e-14));
        assert_eq!(erg.verdict.verdict, crate::scalar_diffusion::Verdict::Ergodic);
        let sym = classify(&m(3, &[0.0, 1.0], &[])).unwrap();
        assert!(sym.antipodally_symmetric && sym.predicts_synchronization);
        assert_eq!(sym.verdict.speed_near_zero, Some(crate::Extended::PosInfinity));
    }

    #[test]
    fn model_validation() {
        assert!(SphereModel::new(2, vec![1.0], vec![]).is_err());
        assert!(SphereModel::new(3, vec![-1.0], vec![]).is_err());
        assert!(SphereModel::<f64>::new(3, vec![0.0], vec![]).is_err());
        assert!(SphereModel::new(3, vec![0.0; 65], vec![1.0]).is_err());
    }

    #[test]
    fn single_precision_model() {
        let model = SphereModel::<f32>::new(3, vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        let s = lyapunov_spectrum(&model).unwrap();
        assert!(s[0].abs() < 1e-5);
    }
}
