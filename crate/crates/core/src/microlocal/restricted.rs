//! Translated family with a vertical axis and `s = t^2 + 1`.
//!
//! Here `g = (x - x0)^2 + (y - y0)^2` is the *squared* planar distance and
//! `h = |x_T|^2 - 1`; on the surface `p = h^2 / g`. The phase is
//! `Phi = sigma (p - h^2/g)`, so with `u = h/g`, `u1 = u - 1`, `u2 = u - 2`
//! the left projection reads
//! `(sigma, x0, y0, u h, -2 sigma u u2 (x - x0), -2 sigma u u2 (y - y0))`.

use crate::error::{Error, Result};
use crate::scalar::{det3, Mat3, Real, Vec3};

/// A point `(sigma; x0, y0; x)` of the restricted canonical relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalSampleRestricted<T: Real> {
    pub sigma: T,
    pub x0: T,
    pub y0: T,
    pub x: Vec3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedScalars<T: Real> {
    pub dx: T,
    pub dy: T,
    pub z: T,
    /// Squared planar distance.
    pub g: T,
    pub h: T,
    pub u: T,
    pub u1: T,
    pub u2: T,
}

pub fn restricted_scalars<T: Real>(
    c: &CanonicalSampleRestricted<T>,
) -> Result<RestrictedScalars<T>> {
    let dx = c.x.x - c.x0;
    let dy = c.x.y - c.y0;
    let z = c.x.z;
    let g = dx * dx + dy * dy;
    if !(g > T::zero()) {
        return Err(Error::DegeneratePoint);
    }
    let h = g + z * z - T::one();
    let u = h / g;
    Ok(RestrictedScalars {
        dx,
        dy,
        z,
        g,
        h,
        u,
        u1: u - T::one(),
        u2: u - T::lit(2.0),
    })
}

/// Left projection `(sigma, x0, y0, p, d_x0 Phi, d_y0 Phi)`.
pub fn restricted_projection<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<[T; 6]> {
    let r = restricted_scalars(c)?;
    let k = -T::lit(2.0) * c.sigma * r.u * r.u2;
    Ok([c.sigma, c.x0, c.y0, r.u * r.h, k * r.dx, k * r.dy])
}

/// `grad_x Phi = sigma (2 u u2 (x - x0), 2 u u2 (y - y0), -4 u z)`.
pub fn restricted_phase_gradient<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<Vec3<T>> {
    let r = restricted_scalars(c)?;
    let two = T::lit(2.0);
    let k = two * c.sigma * r.u * r.u2;
    Ok(Vec3::new(
        k * r.dx,
        k * r.dy,
        -T::lit(4.0) * c.sigma * r.u * r.z,
    ))
}

/// Analytic Jacobian of `(p, d_x0 Phi, d_y0 Phi)` with respect to `x`.
pub fn restricted_m2<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<Mat3<T>> {
    let r = restricted_scalars(c)?;
    let (two, four, eight) = (T::lit(2.0), T::lit(4.0), T::lit(8.0));
    let s = c.sigma;
    let u1sq = r.u1 * r.u1;
    let cross = eight * s / r.g * r.dx * r.dy * u1sq;
    Ok(Mat3::new(
        -two * r.u2 * r.dx * r.u,
        -two * r.u2 * r.dy * r.u,
        four * r.z * r.u,
        -two * s / r.g * (-four * r.dx * r.dx * u1sq + r.h * r.u2),
        cross,
        -eight * s / r.g * r.dx * r.z * r.u1,
        cross,
        -two * s / r.g * (-four * r.dy * r.dy * u1sq + r.h * r.u2),
        -eight * s / r.g * r.dy * r.z * r.u1,
    ))
}

/// `det D Pi_L = -16 z sigma^2 u^4 (u - 2)`.
pub fn det_restricted_jacobian<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<T> {
    let r = restricted_scalars(c)?;
    let u2 = r.u * r.u;
    Ok(-T::lit(16.0) * r.z * c.sigma * c.sigma * u2 * u2 * r.u2)
}

/// The reduced block with `det M2 = 16 z sigma^2 u / g^2 * det M3`.
pub fn m3_matrix<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<Mat3<T>> {
    let r = restricted_scalars(c)?;
    let (two, four) = (T::lit(2.0), T::lit(4.0));
    let u1sq = r.u1 * r.u1;
    Ok(Mat3::new(
        -r.dx * r.u2,
        -r.dy * r.u2,
        T::one(),
        four * r.dx * r.dx * u1sq - r.h * r.u2,
        four * r.dx * r.dy * u1sq,
        -two * r.dx * r.u1,
        four * r.dx * r.dy * u1sq,
        four * r.dy * r.dy * u1sq - r.h * r.u2,
        -two * r.dy * r.u1,
    ))
}

pub fn det_m3<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<T> {
    Ok(det3(&m3_matrix(c)?))
}

/// `-h^2 u u2`.
pub fn det_m3_closed<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<T> {
    let r = restricted_scalars(c)?;
    Ok(-r.h * r.h * r.u * r.u2)
}

/// `2 |u| sqrt(g u2^2 + 4 z^2)`, the norm of `grad_x Phi` at `sigma = 1`.
/// Inside the unit ball `u < 0`, hence the absolute value.
pub fn amplitude_restricted<T: Real>(c: &CanonicalSampleRestricted<T>) -> Result<T> {
    let r = restricted_scalars(c)?;
    Ok(T::lit(2.0) * r.u.abs() * (r.g * r.u2 * r.u2 + T::lit(4.0) * r.z * r.z).sqrt())
}
