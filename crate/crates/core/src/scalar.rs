//! Scalar abstraction for the cone and Lyapunov machinery.
//!
//! Penalty comparisons, weight tables and Lyapunov values only need ring
//! arithmetic, division and an ordering, so they are written once against
//! [`Scalar`]. Floating point types compare ties with a relative tolerance;
//! exact rationals compare ties exactly, which makes them the natural choice
//! for tests that sit deliberately on a cone boundary.

use std::fmt::{Debug, Display};

use num::{BigInt, BigRational, FromPrimitive, Num, Rational64, Signed, ToPrimitive};

pub trait Scalar:
    Num + Clone + Debug + Display + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Relative tolerance of the tie clause in penalty comparisons.
    const TIE_TOLERANCE: f64;
    /// Relative tolerance used when sweeping weight-function identities.
    const CHECK_TOLERANCE: f64;

    /// `|a - b| <= tol * max(|a|, |b|)`; exact equality for exact types.
    fn nearly_eq(a: &Self, b: &Self, tol: f64) -> bool;

    fn from_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits scalar")
    }

    /// Lossy conversion used for reporting.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Strict comparison that treats near-equal values as equal.
    fn definitely_less(a: &Self, b: &Self, tol: f64) -> bool {
        a < b && !Self::nearly_eq(a, b, tol)
    }

    fn max_ref<'a>(a: &'a Self, b: &'a Self) -> &'a Self {
        if a >= b {
            a
        } else {
            b
        }
    }
}

macro_rules! float_scalar {
    ($t:ty, $tie:expr, $check:expr) => {
        impl Scalar for $t {
            const TIE_TOLERANCE: f64 = $tie;
            const CHECK_TOLERANCE: f64 = $check;

            #[inline]
            fn nearly_eq(a: &Self, b: &Self, tol: f64) -> bool {
                let scale = a.abs().max(b.abs());
                (a - b).abs() <= (tol as $t) * scale
            }
        }
    };
}

float_scalar!(f64, 1e-12, 1e-9);
float_scalar!(f32, 1e-5, 1e-4);

impl Scalar for Rational64 {
    const TIE_TOLERANCE: f64 = 0.0;
    const CHECK_TOLERANCE: f64 = 0.0;

    fn nearly_eq(a: &Self, b: &Self, _tol: f64) -> bool {
        a == b
    }
}

impl Scalar for BigRational {
    const TIE_TOLERANCE: f64 = 0.0;
    const CHECK_TOLERANCE: f64 = 0.0;

    fn nearly_eq(a: &Self, b: &Self, _tol: f64) -> bool {
        a == b
    }
}

/// Builds an exact rational `num / den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
