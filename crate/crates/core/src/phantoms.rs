//! Analytic phantoms and support regions.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::RegionPredicate;
use crate::scalar::{norm, norm_sq, Real, Vec3};
use crate::transforms::{GridSpec, ScalarField, VoxelGrid};

/// Support regions for phantoms and surface clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region<T: Real> {
    All,
    /// Open unit ball.
    UnitBall,
    /// `{z > 1}`.
    HalfSpaceZGt1,
    /// `{zmin < z < zmax}`.
    Band {
        zmin: T,
        zmax: T,
    },
    /// Open ball.
    BallAround {
        center: Vec3<T>,
        radius: T,
    },
}

impl<T: Real> Region<T> {
    pub fn contains(&self, x: &Vec3<T>) -> bool {
        match *self {
            Region::All => true,
            Region::UnitBall => x.dot(x) < T::one(),
            Region::HalfSpaceZGt1 => x.z > T::one(),
            Region::Band { zmin, zmax } => x.z > zmin && x.z < zmax,
            Region::BallAround { center, radius } => {
                let d = x - center;
                d.dot(&d) < radius * radius
            }
        }
    }

    /// Whether the closed ball `|x - c| <= r` lies inside the region.
    pub fn contains_ball(&self, c: &Vec3<T>, r: T) -> bool {
        match *self {
            Region::All => true,
            Region::UnitBall => norm(c) + r < T::one(),
            Region::HalfSpaceZGt1 => c.z - r > T::one(),
            Region::Band { zmin, zmax } => c.z - r > zmin && c.z + r < zmax,
            Region::BallAround { center, radius } => norm(&(c - center)) + r < radius,
        }
    }
}

impl<T: Real> RegionPredicate<T> for Region<T> {
    fn contains(&self, x: &Vec3<T>) -> bool {
        Region::contains(self, x)
    }
}

/// Parses `all`, `unit-ball`, `z-gt-1`, `band:ZMIN,ZMAX` or
/// `ball:CX,CY,CZ,R`.
impl<T: Real> FromStr for Region<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.to_string(), Some(t.to_string())),
            None => (s.clone(), None),
        };
        let nums = |t: &Option<String>, n: usize| -> Result<Vec<T>> {
            let t = t
                .as_deref()
                .ok_or_else(|| Error::Parse(format!("region `{s}` needs {n} numbers")))?;
            let v = t
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| Error::Parse(format!("region `{s}`: {e}")))
                })
                .collect::<Result<Vec<T>>>()?;
            if v.len() != n {
                return Err(Error::Parse(format!("region `{s}` needs {n} numbers")));
            }
            Ok(v)
        };
        match head.as_str() {
            "all" => Ok(Region::All),
            "unit-ball" | "unitball" => Ok(Region::UnitBall),
            "z-gt-1" | "halfspace-z-gt-1" | "half-space-z-gt-1" => Ok(Region::HalfSpaceZGt1),
            "band" => {
                let v = nums(&tail, 2)?;
                Ok(Region::Band {
                    zmin: v[0],
                    zmax: v[1],
                })
            }
            "ball" | "ball-around" => {
                let v = nums(&tail, 4)?;
                Ok(Region::BallAround {
                    center: Vec3::new(v[0], v[1], v[2]),
                    radius: v[3],
                })
            }
            _ => Err(Error::Parse(format!("unknown region `{s}`"))),
        }
    }
}

pub fn region_predicate<T: Real>(name: &str) -> Result<Region<T>> {
    name.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    /// Constant inside the sphere.
    Ball,
    /// Constant on `radius - thickness <= |x - c| <= radius`.
    Shell,
    /// `value * exp(-|x - c|^2 / (2 radius^2))`.
    GaussianBlob,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component<T: Real> {
    pub kind: ComponentKind,
    pub center: Vec3<T>,
    pub radius: T,
    pub value: T,
    /// Shell wall thickness; ignored by the other kinds.
    pub thickness: T,
}

impl<T: Real> Component<T> {
    pub fn ball(center: Vec3<T>, radius: T, value: T) -> Self {
        Self {
            kind: ComponentKind::Ball,
            center,
            radius,
            value,
            thickness: radius,
        }
    }

    pub fn gaussian(center: Vec3<T>, radius: T, value: T) -> Self {
        Self {
            kind: ComponentKind::GaussianBlob,
            center,
            radius,
            value,
            thickness: radius,
        }
    }

    pub fn shell(center: Vec3<T>, radius: T, thickness: T, value: T) -> Self {
        Self {
            kind: ComponentKind::Shell,
            center,
            radius,
            value,
            thickness,
        }
    }

    pub fn evaluate(&self, x: &Vec3<T>) -> T {
        let d2 = norm_sq(&(x - self.center));
        match self.kind {
            ComponentKind::Ball => {
                if d2 < self.radius * self.radius {
                    self.value
                } else {
                    T::zero()
                }
            }
            ComponentKind::Shell => {
                let inner = (self.radius - self.thickness).max(T::zero());
                if d2 <= self.radius * self.radius && d2 >= inner * inner {
                    self.value
                } else {
                    T::zero()
                }
            }
            ComponentKind::GaussianBlob => {
                self.value * (-d2 / (T::lit(2.0) * self.radius * self.radius)).exp()
            }
        }
    }

    /// Radius used for support checks. Gaussian blobs are treated as
    /// supported within three standard deviations.
    pub fn support_radius(&self) -> T {
        match self.kind {
            ComponentKind::GaussianBlob => self.radius * T::lit(3.0),
            _ => self.radius,
        }
    }
}

/// Sum of simple components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhantomSpec<T: Real> {
    pub components: Vec<Component<T>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    kind: ComponentKind,
    center: [f64; 3],
    radius: f64,
    #[serde(default = "one")]
    value: f64,
    thickness: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomFile {
    region: Option<String>,
    #[serde(default, rename = "component")]
    components: Vec<ComponentFile>,
}

impl<T: Real> PhantomSpec<T> {
    pub fn new(components: Vec<Component<T>>) -> Result<Self> {
        for c in &components {
            if !(c.radius > T::zero()) || !c.radius.is_finite() {
                return Err(Error::InvalidPhantom(format!(
                    "component radius must be positive, got {}",
                    c.radius
                )));
            }
            if c.kind == ComponentKind::Shell && !(c.thickness > T::zero()) {
                return Err(Error::InvalidPhantom(
                    "shell thickness must be positive".into(),
                ));
            }
        }
        Ok(Self { components })
    }

    /// Parses the TOML phantom format:
    ///
    /// ```toml
    /// region = "z-gt-1"          # optional, checked on load
    /// [[component]]
    /// kind = "ball"              # ball | shell | gaussian-blob
    /// center = [0.0, 0.0, 1.5]
    /// radius = 0.2
    /// value = 1.0
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PhantomFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("phantom spec: {e}")))?;
        let comps = file
            .components
            .iter()
            .map(|c| Component {
                kind: c.kind,
                center: Vec3::new(
                    T::lit(c.center[0]),
                    T::lit(c.center[1]),
                    T::lit(c.center[2]),
                ),
                radius: T::lit(c.radius),
                value: T::lit(c.value),
                thickness: T::lit(c.thickness.unwrap_or(match c.kind {
                    ComponentKind::Shell => c.radius * 0.25,
                    _ => c.radius,
                })),
            })
            .collect();
        let spec = Self::new(comps)?;
        if let Some(region) = file.region {
            spec.validate(&region.parse()?)?;
        }
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            let kind = match c.kind {
                ComponentKind::Ball => "ball",
                ComponentKind::Shell => "shell",
                ComponentKind::GaussianBlob => "gaussian-blob",
            };
            out.push_str("[[component]]\n");
            out.push_str(&format!("kind = \"{kind}\"\n"));
            out.push_str(&format!(
                "center = [{:?}, {:?}, {:?}]\n",
                c.center.x.to_f64_lossy(),
                c.center.y.to_f64_lossy(),
                c.center.z.to_f64_lossy()
            ));
            out.push_str(&format!("radius = {:?}\n", c.radius.to_f64_lossy()));
            out.push_str(&format!("value = {:?}\n", c.value.to_f64_lossy()));
            if c.kind == ComponentKind::Shell {
                out.push_str(&format!("thickness = {:?}\n", c.thickness.to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }

    pub fn evaluate(&self, x: &Vec3<T>) -> T {
        self.components.iter().map(|c| c.evaluate(x)).sum()
    }

    /// Fails on the first component whose support leaves `region`.
    pub fn validate(&self, region: &Region<T>) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if !region.contains_ball(&c.center, c.support_radius()) {
                return Err(Error::InvalidPhantom(format!(
                    "component {i} (centre {:?}, radius {}) leaves the support region {region:?}",
                    c.center.as_slice(),
                    c.radius
                )));
            }
        }
        Ok(())
    }

    /// Samples at voxel centres.
    pub fn rasterize(&self, grid: &GridSpec<T>) -> VoxelGrid<T> {
        let [nx, ny, _] = grid.dims;
        let slab = nx * ny;
        let mut values = vec![T::zero(); grid.len()];
        values
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(k, chunk)| {
                for j in 0..ny {
                    for i in 0..nx {
                        chunk[i + nx * j] = self.evaluate(&grid.center(i, j, k));
                    }
                }
            });
        VoxelGrid {
            spec: *grid,
            values,
        }
    }

    /// Voxel averages from `factor^3` evenly spaced sub-samples; with
    /// `factor = 1` this is [`rasterize`](Self::rasterize). Softens the
    /// staircase of sharp edges.
    pub fn rasterize_supersampled(&self, grid: &GridSpec<T>, factor: usize) -> VoxelGrid<T> {
        let factor = factor.max(1);
        let [nx, ny, _] = grid.dims;
        let slab = nx * ny;
        let offsets: Vec<T> = (0..factor)
            .map(|a| {
                (T::from_usize_lossy(a) + T::lit(0.5)) / T::from_usize_lossy(factor) - T::lit(0.5)
            })
            .collect();
        let inv = T::one() / T::from_usize_lossy(factor * factor * factor);
        let mut values = vec![T::zero(); grid.len()];
        values
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(k, chunk)| {
                for j in 0..ny {
                    for i in 0..nx {
                        let c = grid.center(i, j, k);
                        let mut acc = T::zero();
                        for oz in &offsets {
                            for oy in &offsets {
                                for ox in &offsets {
                                    let d = Vec3::new(
                                        *ox * grid.spacing.x,
                                        *oy * grid.spacing.y,
                                        *oz * grid.spacing.z,
                                    );
                                    acc += self.evaluate(&(c + d));
                                }
                            }
                        }
                        chunk[i + nx * j] = acc * inv;
                    }
                }
            });
        VoxelGrid {
            spec: *grid,
            values,
        }
    }
}

impl<T: Real> ScalarField<T> for PhantomSpec<T> {
    fn value(&self, x: &Vec3<T>) -> T {
        self.evaluate(x)
    }
}
