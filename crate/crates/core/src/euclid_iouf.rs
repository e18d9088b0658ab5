//! Isotropic Ornstein–Uhlenbeck flows `dX = -cX dt + M(dt, X)` on `R^d`, where the field `M`
//! has covariance `b_ij(x) = (B_L - B_N)(|x|) x_i x_j/|x|² + δ_ij B_N(|x|)`.
//!
//! The distance of two points solves
//! `dr = ((d-1)(1 - B_N(r))/r - c r) dt + sqrt(2(1 - B_L(r))) dW`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scalar_diffusion::{synchronization_verdict, Coefficient, DiffusionSpec, SyncVerdict, CRITICAL_BAND};

/// Grid checks extend to this many correlation lengths.
pub const R_MAX_LENGTHS: f64 = 20.0;
const GRID_POINTS: usize = 2000;
const UNIT_TOL: f64 = 1e-12;
const SLOPE_TOL: f64 = 1e-4;
const CURVATURE_TOL: f64 = 1e-4;

/// Longitudinal and normal covariance functions with their curvatures at 0.
#[derive(Clone)]
pub struct CovarianceModel<T: Real> {
    b_l: Coefficient<T>,
    b_n: Coefficient<T>,
    /// `1 - B_L` and `1 - B_N`, accurate for small `r`.
    deficit_l: Coefficient<T>,
    deficit_n: Coefficient<T>,
    beta_l: T,
    beta_n: T,
    description: String,
}

impl<T: Real> std::fmt::Debug for CovarianceModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceModel")
            .field("description", &self.description)
            .field("beta_l", &self.beta_l)
            .field("beta_n", &self.beta_n)
            .finish_non_exhaustive()
    }
}

/// `1 - B` for small `r`, continued by `β r²/2 + (g(r_t) - β r_t²/2)(r/r_t)^4` below `r_t`.
fn deficit<T: Real>(b: Coefficient<T>, beta: T, r_t: T) -> Coefficient<T> {
    let at_t = T::one() - b(r_t);
    let half = T::lit(0.5);
    let quartic = at_t - half * beta * r_t * r_t;
    Arc::new(move |r: T| {
        if r < r_t {
            half * beta * r * r + quartic * (r / r_t).powi(4)
        } else {
            T::one() - b(r)
        }
    })
}

impl<T: Real> CovarianceModel<T> {
    /// `B_L = B_N = exp(-r²/2)`, `β_L = β_N = 1`.
    pub fn gaussian() -> Self {
        let b: Coefficient<T> = Arc::new(|r: T| (-(r * r) * T::lit(0.5)).exp());
        let g: Coefficient<T> = Arc::new(|r: T| -(-(r * r) * T::lit(0.5)).exp_m1());
        CovarianceModel {
            b_l: b.clone(),
            b_n: b,
            deficit_l: g.clone(),
            deficit_n: g,
            beta_l: T::one(),
            beta_n: T::one(),
            description: "gaussian exp(-r^2/2)".into(),
        }
    }

    /// User covariance; the small-`r` deficits `1 - B` are taken from `β r²/2` plus a quartic
    /// correction below 1% of the correlation length to avoid cancellation.
    pub fn custom<L, N>(b_l: L, b_n: N, beta_l: T, beta_n: T, description: impl Into<String>) -> Self
    where
        L: Fn(T) -> T + Send + Sync + 'static,
        N: Fn(T) -> T + Send + Sync + 'static,
    {
        let b_l: Coefficient<T> = Arc::new(b_l);
        let b_n: Coefficient<T> = Arc::new(b_n);
        let length = correlation_length(beta_l, beta_n);
        let r_t = T::lit(0.01) * length;
        CovarianceModel {
            deficit_l: deficit(b_l.clone(), beta_l, r_t),
            deficit_n: deficit(b_n.clone(), beta_n, r_t),
            b_l,
            b_n,
            beta_l,
            beta_n,
            description: description.into(),
        }
    }

    pub fn b_l(&self, r: T) -> T {
        (self.b_l)(r)
    }

    pub fn b_n(&self, r: T) -> T {
        (self.b_n)(r)
    }

    pub fn beta_l(&self) -> T {
        self.beta_l
    }

    pub fn beta_n(&self) -> T {
        self.beta_n
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `1/sqrt(max(β_L, β_N))`.
    pub fn correlation_length(&self) -> T {
        correlation_length(self.beta_l, self.beta_n)
    }
}

fn correlation_length<T: Real>(beta_l: T, beta_n: T) -> T {
    let m = beta_l.max(beta_n);
    if m > T::zero() && m.is_finite() {
        m.sqrt().recip()
    } else {
        T::one()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    /// Sampled point where the check fails.
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub valid: bool,
    /// `-B''(0)` by second-order finite differences.
    pub beta_l_fd: f64,
    pub beta_n_fd: f64,
    pub violations: Vec<Violation>,
}

/// Necessary conditions on `B_L`, `B_N`: unit value and zero slope at 0, `|B| ≤ 1`, positive
/// curvatures matching the declared `β`, and non-constancy. Positive definiteness of the
/// matrix-valued kernel is not certified.
pub fn validate_covariance<T: Real>(model: &CovarianceModel<T>) -> CovarianceReport {
    let mut violations = Vec::new();
    let mut fail = |check: &str, r: T, value: T| {
        violations.push(Violation {
            check: check.into(),
            r: r.as_f64(),
            value: value.as_f64(),
        })
    };
    let length = model.correlation_length();
    let r_max = T::lit(R_MAX_LENGTHS) * length;
    // Steps and tolerances widen only when the scalar's round-off would dominate (f32).
    let root_eps = T::epsilon().sqrt();
    let h1 = T::lit(1e-5).max(root_eps) * length;
    let h2 = T::lit(1e-3).max(root_eps.sqrt()) * length;
    let slope_tol = T::lit(SLOPE_TOL).max(T::lit(10.0) * root_eps);
    let curvature_tol = T::lit(CURVATURE_TOL).max(T::lit(20.0) * root_eps);
    let mut fd = [T::zero(); 2];
    for (k, (name, b, beta)) in [("B_L", &model.b_l, model.beta_l), ("B_N", &model.b_n, model.beta_n)]
        .into_iter()
        .enumerate()
    {
        let b0 = b(T::zero());
        if (b0 - T::one()).abs() > T::lit(UNIT_TOL) {
            fail(&format!("{name}(0) = 1"), T::zero(), b0);
        }
        for i in 0..=GRID_POINTS {
            let r = r_max * T::from_usize_lossy(i) / T::from_usize_lossy(GRID_POINTS);
            let v = b(r);
            if !(v.abs() <= T::one() + T::lit(UNIT_TOL)) {
                fail(&format!("|{name}(r)| <= 1"), r, v);
                break;
            }
        }
        let slope = (b(h1) - b0) / h1;
        if slope.abs() > slope_tol * beta.abs().max(T::one()) {
            fail(&format!("{name}'(0) = 0"), T::zero(), slope);
        }
        let curvature = T::lit(2.0) * (b0 - b(h2)) / (h2 * h2);
        fd[k] = curvature;
        if !(beta > T::zero()) {
            fail(&format!("beta for {name} > 0"), T::zero(), beta);
        }
        if (curvature - beta).abs() > curvature_tol * beta.abs().max(T::one()) {
            fail(&format!("beta for {name} = -{name}''(0)"), T::zero(), curvature);
        }
    }
    let one = T::one();
    if !(model.b_l(one) < one || model.b_n(one) < one) {
        fail("not constant: B_L(1) < 1 or B_N(1) < 1", one, model.b_l(one).min(model.b_n(one)));
    }
    CovarianceReport {
        valid: violations.is_empty(),
        beta_l_fd: fd[0].as_f64(),
        beta_n_fd: fd[1].as_f64(),
        violations,
    }
}

#[derive(Debug, Clone)]
pub struct OUFlowModel<T: Real> {
    d: usize,
    c: T,
    covariance: CovarianceModel<T>,
}

impl<T: Real> OUFlowModel<T> {
    pub fn new(d: usize, c: T, covariance: CovarianceModel<T>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidModel(format!("dimension d = {d} must be at least 2")));
        }
        if !(c >= T::zero() && c.is_finite()) {
            return Err(Error::InvalidModel(format!("damping c = {c} must be finite and nonnegative")));
        }
        let report = validate_covariance(&covariance);
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidModel(format!(
                "covariance '{}': {} fails at r = {} (value {})",
                covariance.description, v.check, v.r, v.value
            )));
        }
        Ok(OUFlowModel { d, c, covariance })
    }

    /// `B_L = B_N = exp(-r²/2)`.
    pub fn gaussian(d: usize, c: T) -> Result<Self> {
        Self::new(d, c, CovarianceModel::gaussian())
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn damping(&self) -> T {
        self.c
    }

    pub fn covariance(&self) -> &CovarianceModel<T> {
        &self.covariance
    }

    pub fn describe(&self) -> String {
        format!("iouf d={} c={} covariance={}", self.d, self.c, self.covariance.description)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopLyapunov<T> {
    /// `(d-1)β_N/2 - β_L/2 - c`.
    pub lambda1: T,
    /// The same expression at `c = 0`.
    pub lambda1_undamped: T,
}

pub fn top_lyapunov<T: Real>(model: &OUFlowModel<T>) -> TopLyapunov<T> {
    let half = T::lit(0.5);
    let cov = &model.covariance;
    let undamped = T::from_usize_lossy(model.d - 1) * cov.beta_n * half - cov.beta_l * half;
    TopLyapunov {
        lambda1: undamped - model.c,
        lambda1_undamped: undamped,
    }
}

/// Distance diffusion on `(0, ∞)` with reference point 1.
pub fn distance_diffusion<T: Real>(model: &OUFlowModel<T>) -> Result<DiffusionSpec<T>> {
    let cov = &model.covariance;
    let r_max = T::lit(R_MAX_LENGTHS) * cov.correlation_length();
    for i in 1..=GRID_POINTS {
        let r = r_max * T::from_usize_lossy(i) / T::from_usize_lossy(GRID_POINTS);
        let g = (cov.deficit_l)(r);
        if !(g > T::zero()) {
            return Err(Error::DegenerateModel(format!(
                "{}: 1 - B_L vanishes at r = {r}",
                model.describe()
            )));
        }
    }
    let (g_l, g_n) = (cov.deficit_l.clone(), cov.deficit_n.clone());
    let dm1 = T::from_usize_lossy(model.d - 1);
    let c = model.c;
    DiffusionSpec::from_variance(
        T::infinity(),
        move |r| dm1 * g_n(r) / r - c * r,
        move |r| T::lit(2.0) * g_l(r),
        T::one(),
        model.describe(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoufReport<T: Real> {
    pub dimension: usize,
    pub damping: T,
    pub covariance: String,
    pub beta_l: T,
    pub beta_n: T,
    #[serde(flatten)]
    pub lyapunov: TopLyapunov<T>,
    /// Analytic prediction: speed measure finite iff `λ₁ > 0`.
    pub predicts_finite_speed: bool,
    /// Set for `c = 0`, where the one-point motion has no invariant probability measure.
    pub not_applicable_reason: Option<String>,
    pub verdict: Option<SyncVerdict<T>>,
}

/// Verdict for the distance diffusion, cross-checked against `λ₁ > 0 ⟺ m(I) < ∞` outside
/// the critical band.
pub fn classify<T: Real>(model: &OUFlowModel<T>) -> Result<IoufReport<T>> {
    let lyapunov = top_lyapunov(model);
    let cov = &model.covariance;
    let mut report = IoufReport {
        dimension: model.d,
        damping: model.c,
        covariance: cov.description.clone(),
        beta_l: cov.beta_l,
        beta_n: cov.beta_n,
        lyapunov,
        predicts_finite_speed: lyapunov.lambda1 > T::zero(),
        not_applicable_reason: None,
        verdict: None,
    };
    if model.c == T::zero() {
        report.not_applicable_reason = Some("one-point motion has no invariant probability measure (c = 0)".into());
        return Ok(report);
    }
    let spec = distance_diffusion(model)?;
    let verdict = synchronization_verdict(&spec)?;
    let band = (T::lit(2.0) * lyapunov.lambda1 / cov.beta_l).abs() < T::lit(CRITICAL_BAND);
    if let (Some(total), false) = (verdict.speed_total, band) {
        if total.is_finite() != report.predicts_finite_speed {
            return Err(Error::Consistency(format!(
                "{}: λ₁ = {} but speed mass is {total}",
                model.describe(),
                lyapunov.lambda1
            )));
        }
    }
    report.verdict = Some(verdict);
    Ok(report)
}
