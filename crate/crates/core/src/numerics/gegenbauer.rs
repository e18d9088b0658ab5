use crate::real::Real;

use super::NumericsError;

/// Derivative order for [`gegenbauer_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl Order {
    fn as_usize(self) -> usize {
        match self {
            Order::Value => 0,
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = NumericsError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(NumericsError::Domain(format!("derivative order {v} not in {{0, 1, 2}}"))),
        }
    }
}

fn check_nu<T: Real>(nu: T) -> Result<(), NumericsError> {
    if !(nu > T::zero()) || !nu.is_finite() {
        return Err(NumericsError::Domain(format!("Gegenbauer parameter nu = {nu} must be positive")));
    }
    Ok(())
}

/// `C^nu_n(x)` by the three-term recurrence
/// `n C_n = 2x(n + nu - 1) C_{n-1} - (n + 2nu - 2) C_{n-2}`.
pub fn gegenbauer_eval<T: Real>(nu: T, n: usize, x: T) -> Result<T, NumericsError> {
    check_nu(nu)?;
    Ok(recurrence(nu, n, x))
}

pub(crate) fn recurrence<T: Real>(nu: T, n: usize, x: T) -> T {
    let two = T::lit(2.0);
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = two * nu * x;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let next = (two * x * (kf + nu - T::one()) * cur - (kf + two * nu - two) * prev) / kf;
        prev = cur;
        cur = next;
    }
    cur
}

/// `C^nu_n(1) = binom(n + 2nu - 1, n)`, evaluated as a running product.
pub fn gegenbauer_at_one<T: Real>(nu: T, n: usize) -> Result<T, NumericsError> {
    check_nu(nu)?;
    Ok(at_one(nu, n))
}

pub(crate) fn at_one<T: Real>(nu: T, n: usize) -> T {
    let two_nu = T::lit(2.0) * nu;
    (1..=n).fold(T::one(), |acc, j| {
        let jf = T::from_usize_lossy(j);
        acc * (two_nu + jf - T::one()) / jf
    })
}

fn check_ratio_args(d: usize, l: usize) -> Result<(), NumericsError> {
    if d < 3 {
        return Err(NumericsError::Domain(format!("dimension d = {d} must be at least 3")));
    }
    if l < 1 {
        return Err(NumericsError::Domain("index l must be at least 1".into()));
    }
    Ok(())
}

/// Normalized Gegenbauer function `gamma_l(x) = C^{d/2}_{l-1}(x) / C^{d/2}_{l-1}(1)` or one of
/// its first two derivatives.
///
/// Derivatives use the parameter shift `d/dx C^nu_n = 2 nu C^{nu+1}_{n-1}`.
pub fn gegenbauer_ratio<T: Real>(d: usize, l: usize, x: T, order: Order) -> Result<T, NumericsError> {
    check_ratio_args(d, l)?;
    let nu = T::from_usize_lossy(d) / T::lit(2.0);
    let n = l - 1;
    let k = order.as_usize();
    if k > n {
        return Ok(T::zero());
    }
    // 2^k (nu)_k
    let mut factor = T::one();
    for j in 0..k {
        factor = factor * T::lit(2.0) * (nu + T::from_usize_lossy(j));
    }
    let shifted = recurrence(nu + T::from_usize_lossy(k), n - k, x);
    Ok(factor * shifted / at_one(nu, n))
}

/// Taylor coefficients of `gamma_l` about `x = 1`: `gamma_l(x) = sum_k c_k (x - 1)^k`.
///
/// All coefficients are positive; `c_0 = 1`.
pub fn gegenbauer_ratio_taylor<T: Real>(d: usize, l: usize) -> Result<Vec<T>, NumericsError> {
    check_ratio_args(d, l)?;
    let nu = T::from_usize_lossy(d) / T::lit(2.0);
    let n = l - 1;
    let norm = at_one(nu, n);
    let mut out = Vec::with_capacity(n + 1);
    let mut factor = T::one(); // 2^k (nu)_k / k!
    for k in 0..=n {
        if k > 0 {
            let kf = T::from_usize_lossy(k);
            factor = factor * T::lit(2.0) * (nu + kf - T::one()) / kf;
        }
        out.push(factor * at_one(nu + T::from_usize_lossy(k), n - k) / norm);
    }
    Ok(out)
}
