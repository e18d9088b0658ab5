use std::fmt;

use serde::{Serialize, Serializer};

use crate::real::Real;

/// A real number or a signed infinity, for integrals and limits that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    PosInfinity,
    NegInfinity,
}

impl<T: Real> Extended<T> {
    pub fn from_real(v: T) -> Self {
        if v == T::infinity() {
            Extended::PosInfinity
        } else if v == T::neg_infinity() {
            Extended::NegInfinity
        } else {
            Extended::Finite(v)
        }
    }

    pub fn to_real(self) -> T {
        match self {
            Extended::Finite(v) => v,
            Extended::PosInfinity => T::infinity(),
            Extended::NegInfinity => T::neg_infinity(),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_f64(self) -> Extended<f64> {
        match self {
            Extended::Finite(v) => Extended::Finite(v.as_f64()),
            Extended::PosInfinity => Extended::PosInfinity,
            Extended::NegInfinity => Extended::NegInfinity,
        }
    }

    /// Sum of two extended values; `+inf + -inf` is not defined and yields `None`.
    pub fn checked_add(self, other: Self) -> Option<Self> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Extended::from_real(a + b)),
            (PosInfinity, NegInfinity) | (NegInfinity, PosInfinity) => None,
            (PosInfinity, _) | (_, PosInfinity) => Some(PosInfinity),
            (NegInfinity, _) | (_, NegInfinity) => Some(NegInfinity),
        }
    }
}

impl<T: Real> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => f.write_str("+inf"),
            Extended::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// Finite values serialize as numbers, infinities as the strings `"+inf"` / `"-inf"`.
impl<T: Real> Serialize for Extended<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(v.as_f64()),
            Extended::PosInfinity => s.serialize_str("+inf"),
            Extended::NegInfinity => s.serialize_str("-inf"),
        }
    }
}
