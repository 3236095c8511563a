//! Scalar abstraction shared by all numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra::{Matrix3, Vector3};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the geometry and transform code is generic over.
///
/// Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + nalgebra::Scalar
    + Copy
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec3<T> = Vector3<T>;
pub type Mat3<T> = Matrix3<T>;

#[inline]
pub fn norm<T: Real>(v: &Vec3<T>) -> T {
    v.dot(v).sqrt()
}

#[inline]
pub fn norm_sq<T: Real>(v: &Vec3<T>) -> T {
    v.dot(v)
}

/// Determinant of a 3x3 matrix by cofactor expansion.
pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Converts a vector between scalar types.
pub fn cast_vec3<A: Real, B: Real>(v: &Vec3<A>) -> Vec3<B> {
    Vec3::new(
        B::lit(v.x.to_f64_lossy()),
        B::lit(v.y.to_f64_lossy()),
        B::lit(v.z.to_f64_lossy()),
    )
}
