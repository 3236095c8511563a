//! Regular voxel grids and trilinear sampling.

use crate::error::{Error, Result};
use crate::scalar::{Real, Vec3};

/// Geometry of a regular grid. Voxel `(i, j, k)` has its centre at
/// `origin + (i, j, k) * spacing`; storage is x-fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T: Real> {
    pub dims: [usize; 3],
    pub spacing: Vec3<T>,
    pub origin: Vec3<T>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(dims: [usize; 3], spacing: Vec3<T>, origin: Vec3<T>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Dimension(format!(
                "grid dims must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(Error::Dimension(
                "grid spacing must be positive and finite".into(),
            ));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Dimension("grid origin must be finite".into()));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Grid whose voxels tile the box `[lo, hi]` (voxel centres sit half a
    /// voxel inside the box faces).
    pub fn covering(dims: [usize; 3], lo: Vec3<T>, hi: Vec3<T>) -> Result<Self> {
        let half = T::lit(0.5);
        let mut spacing = Vec3::zeros();
        let mut origin = Vec3::zeros();
        for a in 0..3 {
            if dims[a] == 0 {
                return Err(Error::Dimension(format!(
                    "grid dims must be positive, got {dims:?}"
                )));
            }
            spacing[a] = (hi[a] - lo[a]) / T::from_usize_lossy(dims[a]);
            origin[a] = lo[a] + spacing[a] * half;
        }
        Self::new(dims, spacing, origin)
    }

    /// `n^3` voxels tiling the cube `[-half_width, half_width]^3`.
    pub fn cube(n: usize, half_width: T) -> Result<Self> {
        let h = Vec3::repeat(half_width);
        Self::covering([n, n, n], -h, h)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        Vec3::new(
            self.origin.x + self.spacing.x * T::from_usize_lossy(i),
            self.origin.y + self.spacing.y * T::from_usize_lossy(j),
            self.origin.z + self.spacing.z * T::from_usize_lossy(k),
        )
    }

    #[inline]
    pub fn center_of(&self, idx: usize) -> Vec3<T> {
        let [i, j, k] = self.unravel(idx);
        self.center(i, j, k)
    }

    pub fn voxel_volume(&self) -> T {
        self.spacing.x * self.spacing.y * self.spacing.z
    }

    /// The eight trilinear neighbours of `x` with their weights. Neighbours
    /// that fall outside the grid are reported with weight zero, so sampling
    /// treats the exterior as zero and splatting drops the contribution.
    pub fn trilinear_stencil(&self, x: &Vec3<T>) -> Option<[(usize, T); 8]> {
        let mut base = [0isize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let q = (x[a] - self.origin[a]) / self.spacing[a];
            if !q.is_finite() {
                return None;
            }
            let fl = q.floor();
            let b = fl.to_isize()?;
            if b < -1 || b >= self.dims[a] as isize {
                return None;
            }
            base[a] = b;
            frac[a] = q - fl;
        }
        let mut out = [(0usize, T::zero()); 8];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut w = T::one();
            let mut idx = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let hi = (c >> a) & 1 == 1;
                let n = base[a] + hi as isize;
                if n < 0 || n >= self.dims[a] as isize {
                    inside = false;
                    break;
                }
                idx[a] = n as usize;
                w *= if hi { frac[a] } else { T::one() - frac[a] };
            }
            if inside {
                *slot = (self.linear_index(idx[0], idx[1], idx[2]), w);
            }
        }
        Some(out)
    }
}

/// Dense scalar volume on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T: Real> {
    pub spec: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn zeros(spec: GridSpec<T>) -> Self {
        Self {
            values: vec![T::zero(); spec.len()],
            spec,
        }
    }

    pub fn from_values(spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Dimension(format!(
                "expected {} voxel values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("voxel values must be finite".into()));
        }
        Ok(Self { spec, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.spec.linear_index(i, j, k)]
    }

    /// Trilinear interpolation; zero outside the grid.
    pub fn sample(&self, x: &Vec3<T>) -> T {
        match self.spec.trilinear_stencil(x) {
            Some(st) => st.iter().map(|&(i, w)| w * self.values[i]).sum(),
            None => T::zero(),
        }
    }

    /// Adds `amount` at `x` distributed over the trilinear neighbours; the
    /// transpose of [`VoxelGrid::sample`].
    pub fn splat(&mut self, x: &Vec3<T>, amount: T) {
        if let Some(st) = self.spec.trilinear_stencil(x) {
            for (i, w) in st {
                self.values[i] += w * amount;
            }
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a * *b)
            .sum()
    }

    /// Riemann sum `sum(values) * voxel volume`.
    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.spec.voxel_volume()
    }

    /// Volume shifted by whole voxels; vacated voxels become zero.
    pub fn shifted(&self, by: [isize; 3]) -> Self {
        let [nx, ny, nz] = self.spec.dims;
        let mut out = Self::zeros(self.spec);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let src = [i as isize - by[0], j as isize - by[1], k as isize - by[2]];
                    if src
                        .iter()
                        .zip(&self.spec.dims)
                        .all(|(&s, &d)| s >= 0 && s < d as isize)
                    {
                        out.values[self.spec.linear_index(i, j, k)] =
                            self.get(src[0] as usize, src[1] as usize, src[2] as usize);
                    }
                }
            }
        }
        out
    }
}

/// Anything that can be evaluated at a point of space.
pub trait ScalarField<T: Real> {
    fn value(&self, x: &Vec3<T>) -> T;
}

impl<T: Real, F> ScalarField<T> for F
where
    F: Fn(&Vec3<T>) -> T,
{
    fn value(&self, x: &Vec3<T>) -> T {
        self(x)
    }
}

impl<T: Real> ScalarField<T> for VoxelGrid<T> {
    fn value(&self, x: &Vec3<T>) -> T {
        self.sample(x)
    }
}
