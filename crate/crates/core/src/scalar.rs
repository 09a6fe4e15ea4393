//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar usable by the geometry engine: `f32` or `f64`.
pub trait Real:
    na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion to `f64` for diagnostics and reports.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `1 + max |x|` over the supplied values; the hybrid scale used by every tolerance.
pub fn scale_of<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut m = T::zero();
    for v in values {
        let a = v.abs();
        if a > m {
            m = a;
        }
    }
    T::one() + m
}
