//! Scalar abstraction for times, rates and branch weights.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;

/// Floating-point type used for times, rates and substitution weights.
///
/// Everything in the crate that touches a continuous quantity is generic over
/// this trait; `f64` is the default through the aliases at the crate root.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance for ultrametricity, contemporaneity and weight
    /// comparisons.
    fn tolerance() -> Self;

    /// Lossy conversion from `f64` (used for literals and Poisson means).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// `|self - other| <= tolerance()`.
    fn approx_eq(self, other: Self) -> bool {
        (self - other).abs() <= Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-4
    }
}

/// Lower median (the `⌈k/2⌉`-th smallest of `k` values); `None` for an empty
/// slice. The slice is reordered in place.
pub fn lower_median<T: PartialOrd + Copy>(values: &mut [T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mid = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| {
        a.partial_cmp(b).expect("median input must not contain NaN")
    });
    Some(*m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_median_odd_and_even() {
        assert_eq!(lower_median(&mut [2, 2, 3, 2, 5]), Some(2));
        assert_eq!(lower_median(&mut [4, 1, 3, 2]), Some(2));
        assert_eq!(lower_median(&mut [7]), Some(7));
        assert_eq!(lower_median::<u32>(&mut []), None);
        assert_eq!(lower_median(&mut [0.5, 0.25]), Some(0.25));
    }

    #[test]
    fn tolerances() {
        assert!(1.0f64.approx_eq(1.0 + 5e-10));
        assert!(!1.0f64.approx_eq(1.0 + 5e-9));
        assert!(1.0f32.approx_eq(1.00001));
    }
}
