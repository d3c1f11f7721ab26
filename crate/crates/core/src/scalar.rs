//! Scalar abstraction shared by every physics routine.
//!
//! All closed-form models in this crate are written against [`Real`] so they
//! can be evaluated in `f32` for quick sweeps or `f64` for reference runs.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};

/// Floating point type usable by the simulator: `f32` or `f64`.
pub trait Real:
    RealField
    + Copy
    + Default
    + Debug
    + Display
    + FromPrimitive
    + ToPrimitive
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon of the underlying type.
    const EPS: f64;
}

impl Real for f32 {
    const EPS: f64 = f32::EPSILON as f64;
}

impl Real for f64 {
    const EPS: f64 = f64::EPSILON;
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64` for reporting and I/O.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

/// Returns true if the slice is non-decreasing and every entry is finite.
pub fn is_sorted_finite<T: Real>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] <= w[1])
}

/// Evenly spaced grid of `n` points over `[start, stop]`.
pub fn linspace<T: Real>(start: T, stop: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / lit::<T>((n - 1) as f64);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + step * lit::<T>(i as f64)
                    }
                })
                .collect()
        }
    }
}
