//! Scalar abstraction shared by the floating-point and exact-rational
//! evaluations of the recurrences.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num};

/// A field-like scalar: `f64` for numerics and [`BigRational`] for exact
/// oracles on rational inputs.
pub trait Scalar: Num + Clone + FromPrimitive + PartialOrd {}

impl<T: Num + Clone + FromPrimitive + PartialOrd> Scalar for T {}

/// The rational number `num/den` in the scalar type `T`.
pub fn ratio<T: Scalar>(num: i64, den: i64) -> T {
    T::from_i64(num).expect("integer constant") / T::from_i64(den).expect("integer constant")
}

/// Exact rational `num/den` as a [`BigRational`].
pub fn big_ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Converts an exact rational to the nearest `f64`.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}
