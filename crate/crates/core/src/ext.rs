//! Extended reals used for boundary limits of functional derivatives.

use std::cmp::Ordering;
use std::fmt;

/// A real number or one of the two infinities.
///
/// Comparisons and sign tests go through this type rather than through raw
/// `f64` infinities so that boundary logic never touches NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps `±inf` to the matching infinity. NaN maps to `None`.
    pub fn from_f64(x: f64) -> Option<ExtReal> {
        if x.is_nan() {
            None
        } else if x == f64::INFINITY {
            Some(ExtReal::PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(ExtReal::NegInf)
        } else {
            Some(ExtReal::Finite(x))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Sum of two extended reals; `None` for `+inf + -inf`.
    pub fn checked_add(self, other: ExtReal) -> Option<ExtReal> {
        use ExtReal::*;
        match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => None,
            (PosInf, _) | (_, PosInf) => Some(PosInf),
            (NegInf, _) | (_, NegInf) => Some(NegInf),
            (Finite(a), Finite(b)) => ExtReal::from_f64(a + b),
        }
    }

    /// Product with a finite scalar, using `0 * inf = 0`.
    pub fn scale(self, c: f64) -> ExtReal {
        use ExtReal::*;
        if c == 0.0 {
            return ExtReal::ZERO;
        }
        match self {
            Finite(x) => ExtReal::from_f64(c * x).unwrap_or(ExtReal::ZERO),
            PosInf if c > 0.0 => PosInf,
            PosInf => NegInf,
            NegInf if c > 0.0 => NegInf,
            NegInf => PosInf,
        }
    }

    pub fn abs(self) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x.abs()),
            _ => ExtReal::PosInf,
        }
    }

    pub fn gt(self, x: f64) -> bool {
        self > ExtReal::Finite(x)
    }

    pub fn lt(self, x: f64) -> bool {
        self < ExtReal::Finite(x)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl From<f64> for ExtReal {
    /// Panics on NaN.
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("NaN is not an extended real")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::Finite(x) => write!(f, "{x:.16e}"),
        }
    }
}

impl std::ops::Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        self.scale(-1.0)
    }
}
