//! Scalar abstraction shared by the numeric parts of the pipeline.
//!
//! Feature values, entropies, gain ratios, cutpoints and AUC cells are all
//! computed over a generic [`Scalar`], so the same code runs in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::float::TotalOrder;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable throughout the crate.
pub trait Scalar:
    Float
    + TotalOrder
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts a literal. Every `f64` literal used by the crate is representable
    /// (possibly rounded) in both supported widths.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal converts to scalar")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count converts to scalar")
    }

    /// Absolute slack used when comparing gains and ratios computed along
    /// different summation orders.
    fn tolerance() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean of the finite values yielded by `values`, `None` when there are none.
pub fn mean<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> Option<F> {
    let (sum, n) = values
        .into_iter()
        .fold((F::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / F::from_count(n))
}
