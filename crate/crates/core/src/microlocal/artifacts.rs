//! Predicted artifact locations and the cone-beam opening angle.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::SurfaceKind;
use crate::scalar::{norm, Real, Vec3};
use crate::transforms::{GridSpec, ProjectionParams};

/// Transform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Full7dApple,
    Full7dLemon,
    RestrictedApple,
    RestrictedLemon,
}

impl Family {
    pub fn kind(self) -> SurfaceKind {
        match self {
            Family::Full7dApple | Family::RestrictedApple => SurfaceKind::Apple,
            Family::Full7dLemon | Family::RestrictedLemon => SurfaceKind::Lemon,
        }
    }

    pub fn is_restricted(self) -> bool {
        matches!(self, Family::RestrictedApple | Family::RestrictedLemon)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Full7dApple => "full-apple",
            Family::Full7dLemon => "full-lemon",
            Family::RestrictedApple => "restricted-apple",
            Family::RestrictedLemon => "restricted-lemon",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "full-apple" | "full7d-apple" => Ok(Family::Full7dApple),
            "full-lemon" | "full7d-lemon" => Ok(Family::Full7dLemon),
            "restricted-apple" => Ok(Family::RestrictedApple),
            "restricted-lemon" => Ok(Family::RestrictedLemon),
            other => Err(Error::Parse(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    /// Apple meets the cylinder `g = t` about its axis.
    CylinderRings,
    /// Restricted apple meets the hyperboloid `u = 2`.
    Hyperboloid,
    /// Mirror images across `z = 0`.
    ZReflection,
}

/// A circle of radius `radius` about `axis`, centred at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring<T: Real> {
    pub center: Vec3<T>,
    pub axis: Vec3<T>,
    pub radius: T,
}

impl<T: Real> Ring<T> {
    /// Two unit vectors spanning the ring's plane.
    fn basis(&self) -> (Vec3<T>, Vec3<T>) {
        let a = self.axis;
        let helper = if a.x.abs() < T::lit(0.9) {
            Vec3::new(T::one(), T::zero(), T::zero())
        } else {
            Vec3::new(T::zero(), T::one(), T::zero())
        };
        let e1 = helper - a * a.dot(&helper);
        let e1 = e1 / norm(&e1);
        let e2 = a.cross(&e1);
        (e1, e2)
    }

    pub fn point(&self, theta: T) -> Vec3<T> {
        let (e1, e2) = self.basis();
        self.center + (e1 * theta.cos() + e2 * theta.sin()) * self.radius
    }

    pub fn points(&self, n: usize) -> Vec<Vec3<T>> {
        let step = (T::PI() + T::PI()) / T::from_usize_lossy(n.max(1));
        (0..n)
            .map(|k| self.point(step * T::from_usize_lossy(k)))
            .collect()
    }

    /// Euclidean distance from `x` to the circle.
    pub fn distance(&self, x: &Vec3<T>) -> T {
        let d = x - self.center;
        let along = d.dot(&self.axis);
        let radial = norm(&(d - self.axis * along));
        let dr = radial - self.radius;
        (dr * dr + along * along).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet<T: Real> {
    pub kind: ArtifactKind,
    pub family: Family,
    pub params: ProjectionParams<T>,
    pub rings: Vec<Ring<T>>,
    /// Heights (restricted family) or axial offsets (full family) of the rings.
    pub ring_z: (T, T),
    pub description: String,
}

/// Rings where the apple's left projection fails to be an injective
/// immersion. For the full family they are the apple's intersection with the
/// cylinder `g = t`: circles of radius `t` at axial offsets `+/- sqrt(s)`.
/// For the restricted family they are the intersection with the hyperboloid
/// `z^2 - (x - x0)^2 - (y - y0)^2 = 1`, i.e. `z = +/- sqrt(t^2 + 1)`. Lemon
/// families have no such set and are rejected.
pub fn predict_artifacts<T: Real>(
    family: Family,
    params: &ProjectionParams<T>,
) -> Result<ArtifactSet<T>> {
    match (family, params) {
        (Family::Full7dLemon | Family::RestrictedLemon, _) => {
            Err(Error::UnsupportedFamily(format!(
                "{family}: the lemon left projection is an injective immersion, no artifact rings"
            )))
        }
        (Family::Full7dApple, ProjectionParams::Full(tp)) => {
            let axis = tp.frame().axis();
            let h = tp.s.sqrt();
            let rings = vec![
                Ring {
                    center: tp.x0 + axis * h,
                    axis,
                    radius: tp.t,
                },
                Ring {
                    center: tp.x0 - axis * h,
                    axis,
                    radius: tp.t,
                },
            ];
            Ok(ArtifactSet {
                kind: ArtifactKind::CylinderRings,
                family,
                params: *params,
                rings,
                ring_z: (h, -h),
                description: format!(
                    "apple meets cylinder g = t: circles of radius {} at axial offset +/-{}",
                    tp.t, h
                ),
            })
        }
        (Family::RestrictedApple, ProjectionParams::Restricted(rp)) => {
            let axis = Vec3::new(T::zero(), T::zero(), T::one());
            let r = rp.r();
            let rings = [r, -r]
                .iter()
                .map(|&z| Ring {
                    center: Vec3::new(rp.x0, rp.y0, z),
                    axis,
                    radius: rp.t(),
                })
                .collect();
            Ok(ArtifactSet {
                kind: ArtifactKind::Hyperboloid,
                family,
                params: *params,
                rings,
                ring_z: (r, -r),
                description: format!(
                    "apple meets hyperboloid z^2-(x-{x0})^2-(y-{y0})^2=1 at z = +/-{r}, radius {t}",
                    x0 = rp.x0,
                    y0 = rp.y0,
                    t = rp.t()
                ),
            })
        }
        _ => Err(Error::InvalidParams(format!(
            "parameters do not belong to family {family}"
        ))),
    }
}

/// `z^2 - (x - x0)^2 - (y - y0)^2 - 1`; zero exactly where `u = 2`.
pub fn hyperboloid_residual<T: Real>(x0: T, y0: T, x: &Vec3<T>) -> T {
    let dx = x.x - x0;
    let dy = x.y - y0;
    x.z * x.z - dx * dx - dy * dy - T::one()
}

/// Voxels whose centres lie within `dilation` voxels (largest spacing) of any
/// ring.
pub fn ring_mask<'a, T: Real>(
    rings: impl IntoIterator<Item = &'a Ring<T>>,
    grid: &GridSpec<T>,
    dilation: T,
) -> Vec<bool> {
    let reach = dilation * grid.spacing.x.max(grid.spacing.y).max(grid.spacing.z);
    let mut mask = vec![false; grid.len()];
    for ring in rings {
        for (idx, m) in mask.iter_mut().enumerate() {
            if !*m && ring.distance(&grid.center_of(idx)) <= reach {
                *m = true;
            }
        }
    }
    mask
}

/// Cone-beam opening angle in degrees that keeps scattering on `u > 2` for
/// objects above `z = 1 + eps`.
pub fn cone_angle_degrees<T: Real>(eps: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let a = ((one + eps) * (one + eps) - one).sqrt() / (two + eps);
    (two * a.atan()).to_degrees().min(T::lit(90.0))
}
