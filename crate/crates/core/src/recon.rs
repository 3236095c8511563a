//! Landweber reconstruction, operator-norm estimation and a small dense
//! operator used as an oracle.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{QuadratureSpec, SurfaceKind};
use crate::io::Report;
use crate::microlocal::{predict_artifacts, ring_mask, Family, Ring};
use crate::phantoms::{PhantomSpec, Region};
use crate::scalar::{norm, Real, Vec3};
use crate::transforms::{
    DataGrid, GridSpec, ProjectionParams, RestrictedParams, SystemMatrix, VoxelGrid,
};

/// Largest grid accepted by [`build_dense_operator`].
pub const DENSE_MAX_VOXELS: usize = 12 * 12 * 12;
/// Largest parameter list accepted by [`build_dense_operator`].
pub const DENSE_MAX_PARAMS: usize = 500;

/// A linear map with its transpose.
pub trait LinearOperator<T: Real>: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_adjoint(&self, y: &[T]) -> Vec<T>;
}

impl<T: Real> LinearOperator<T> for SystemMatrix<T> {
    fn n_rows(&self) -> usize {
        SystemMatrix::n_rows(self)
    }
    fn n_cols(&self) -> usize {
        SystemMatrix::n_cols(self)
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        SystemMatrix::apply(self, x)
    }
    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        self.apply_transpose(y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl<T: Real> LinearOperator<T> for IdentityOperator {
    fn n_rows(&self) -> usize {
        self.0
    }
    fn n_cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        y.to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalOperator<T: Real>(pub Vec<T>);

impl<T: Real> LinearOperator<T> for DiagonalOperator<T> {
    fn n_rows(&self) -> usize {
        self.0.len()
    }
    fn n_cols(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.0.iter().zip(x).map(|(d, v)| *d * *v).collect()
    }
    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        self.apply(y)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T: Real> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> DenseOperator<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl<T: Real> LinearOperator<T> for DenseOperator<T> {
    fn n_rows(&self) -> usize {
        self.rows
    }
    fn n_cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| *a * *b).sum())
            .collect()
    }
    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (row, &d) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += *a * d;
            }
        }
        out
    }
}

fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate<T: Real> {
    pub norm: T,
    /// Estimate after each iteration; nondecreasing.
    pub history: Vec<T>,
    /// Whether the last relative change was at most `1e-3`.
    pub converged: bool,
}

/// Power iteration on `A^T A` from a fixed pseudo-random start. Each
/// estimate is `|A x_k|` for the unit iterate `x_k`, which never decreases
/// for a positive semidefinite `A^T A`.
pub fn estimate_operator_norm<T: Real>(
    op: &impl LinearOperator<T>,
    iters: usize,
) -> NormEstimate<T> {
    let n = op.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect();
    let mut history = Vec::with_capacity(iters);
    let nx = norm2(&x);
    if n == 0 || nx == T::zero() {
        return NormEstimate {
            norm: T::zero(),
            history,
            converged: true,
        };
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut converged = false;
    for _ in 0..iters.max(1) {
        let ax = op.apply(&x);
        let est = norm2(&ax);
        let mut y = op.apply_adjoint(&ax);
        if let Some(&prev) = history.last() {
            let prev: T = prev;
            converged = (est - prev).abs() <= T::lit(1e-3) * est.max(T::min_positive_value());
        }
        history.push(est);
        let ny = norm2(&y);
        if ny == T::zero() {
            converged = true;
            break;
        }
        y.iter_mut().for_each(|v| *v /= ny);
        x = y;
    }
    NormEstimate {
        norm: *history.last().unwrap_or(&T::zero()),
        history,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandweberConfig<T: Real> {
    /// Step as a multiple of `1 / |A|^2`; must lie in `(0, 2)`.
    pub step_scale: T,
    pub iterations: usize,
    pub nonnegativity: bool,
}

impl<T: Real> Default for LandweberConfig<T> {
    fn default() -> Self {
        Self {
            step_scale: T::one(),
            iterations: 50,
            nonnegativity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberResult<T: Real> {
    pub solution: Vec<T>,
    /// `|d - A x_k|` for `k = 0..=iterations`, starting from `x_0 = 0`.
    pub residual_norms: Vec<T>,
    pub step: T,
    pub operator_norm: T,
}

/// `x_{k+1} = x_k + lambda A^T (d - A x_k)` with `lambda = step_scale /
/// |A|^2`. Fails if the residual grows by more than 10% in one step.
pub fn landweber<T: Real>(
    op: &impl LinearOperator<T>,
    data: &[T],
    cfg: &LandweberConfig<T>,
    operator_norm: Option<T>,
) -> Result<LandweberResult<T>> {
    if !(cfg.step_scale > T::zero() && cfg.step_scale < T::lit(2.0)) {
        return Err(Error::InvalidParams(format!(
            "step scale must lie in (0, 2), got {}",
            cfg.step_scale
        )));
    }
    if data.len() != op.n_rows() {
        return Err(Error::Dimension(format!(
            "operator has {} rows but data has {} entries",
            op.n_rows(),
            data.len()
        )));
    }
    if data.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParams("data must be finite".into()));
    }
    let op_norm = operator_norm.unwrap_or_else(|| estimate_operator_norm(op, 100).norm);
    let mut x = vec![T::zero(); op.n_cols()];
    let mut residual: Vec<T> = data.to_vec();
    let mut norms = vec![norm2(&residual)];
    if op_norm == T::zero() {
        return Ok(LandweberResult {
            solution: x,
            residual_norms: norms,
            step: T::zero(),
            operator_norm: op_norm,
        });
    }
    let step = cfg.step_scale / (op_norm * op_norm);
    for k in 0..cfg.iterations {
        let grad = op.apply_adjoint(&residual);
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi += step * *gi;
            if cfg.nonnegativity && *xi < T::zero() {
                *xi = T::zero();
            }
        }
        let ax = op.apply(&x);
        for ((r, d), a) in residual.iter_mut().zip(data).zip(&ax) {
            *r = *d - *a;
        }
        let current = norm2(&residual);
        let previous = norms[norms.len() - 1];
        if current > previous * T::lit(1.1) {
            return Err(Error::Divergence {
                iteration: k + 1,
                previous: previous.to_f64_lossy(),
                current: current.to_f64_lossy(),
            });
        }
        norms.push(current);
    }
    Ok(LandweberResult {
        solution: x,
        residual_norms: norms,
        step,
        operator_norm: op_norm,
    })
}

/// Explicit matrix of the discrete forward map: column `j` is the
/// projection of the indicator of voxel `j`.
pub fn build_dense_operator<T: Real>(
    plist: &[ProjectionParams<T>],
    kind: SurfaceKind,
    quad: QuadratureSpec,
    grid: &GridSpec<T>,
) -> Result<DenseOperator<T>> {
    if grid.len() > DENSE_MAX_VOXELS {
        return Err(Error::SizeLimit(format!(
            "dense operator limited to {DENSE_MAX_VOXELS} voxels, grid has {}",
            grid.len()
        )));
    }
    if plist.len() > DENSE_MAX_PARAMS {
        return Err(Error::SizeLimit(format!(
            "dense operator limited to {DENSE_MAX_PARAMS} parameters, got {}",
            plist.len()
        )));
    }
    let mut m = DenseOperator::zeros(plist.len(), grid.len());
    for (i, p) in plist.iter().enumerate() {
        let q = p.quadrature(kind, quad).map_err(|e| Error::Element {
            index: i,
            source: Box::new(e),
        })?;
        for node in q.points.iter().filter(|n| n.weight != T::zero()) {
            if let Some(st) = grid.trilinear_stencil(&node.x) {
                for (v, w) in st {
                    m.data[i * grid.len() + v] += w * node.weight;
                }
            }
        }
    }
    Ok(m)
}

/// Minimum-norm least-squares solution by SVD.
pub fn dense_least_squares(op: &DenseOperator<f64>, data: &[f64]) -> Result<Vec<f64>> {
    let a = op.to_nalgebra();
    let b = nalgebra::DVector::from_column_slice(data);
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * (op.rows.max(op.cols) as f64);
    let x = svd
        .solve(&b, tol)
        .map_err(|e| Error::InvalidParams(format!("least squares: {e}")))?;
    Ok(x.iter().copied().collect())
}

/// Singular values of the dense operator, largest first.
pub fn dense_singular_values(op: &DenseOperator<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = op.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Outcome of a reconstruction. Energies are mean squared errors against
/// the rasterized phantom; they and the ratio are `None` when undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport<T: Real> {
    pub residual_norms: Vec<T>,
    pub volume: VoxelGrid<T>,
    pub ring_artifact_energy: Option<T>,
    pub background_energy: Option<T>,
    pub ratio: Option<T>,
    pub ring_voxels: usize,
    pub background_voxels: usize,
    pub step: T,
    pub operator_norm: T,
}

impl<T: Real> ReconReport<T> {
    pub fn to_report(&self) -> Report {
        let opt = |v: Option<T>| v.map_or("undefined".to_string(), |v| v.to_string());
        let mut r = Report::default();
        r.push("iterations", self.residual_norms.len().saturating_sub(1))
            .push("initial_residual", self.residual_norms[0])
            .push(
                "final_residual",
                self.residual_norms[self.residual_norms.len() - 1],
            )
            .push("step", self.step)
            .push("operator_norm", self.operator_norm)
            .push("ring_artifact_energy", opt(self.ring_artifact_energy))
            .push("background_energy", opt(self.background_energy))
            .push("ratio", opt(self.ratio))
            .push("ring_voxels", self.ring_voxels)
            .push("background_voxels", self.background_voxels);
        r
    }
}

/// Landweber on an assembled system matrix, wrapped as a report without
/// artifact energies.
pub fn reconstruct<T: Real>(
    data: &DataGrid<T>,
    kind: SurfaceKind,
    quad: QuadratureSpec,
    grid: &GridSpec<T>,
    cfg: &LandweberConfig<T>,
) -> Result<ReconReport<T>> {
    let a = SystemMatrix::assemble(&data.params, kind, quad, grid)?;
    let res = landweber(&a, &data.values, cfg, None)?;
    Ok(ReconReport {
        residual_norms: res.residual_norms,
        volume: VoxelGrid::from_values(*grid, res.solution)?,
        ring_artifact_energy: None,
        background_energy: None,
        ratio: None,
        ring_voxels: 0,
        background_voxels: 0,
        step: res.step,
        operator_norm: res.operator_norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactConfig<T: Real> {
    pub grid: GridSpec<T>,
    pub params: Vec<RestrictedParams<T>>,
    pub quad: QuadratureSpec,
    pub landweber: LandweberConfig<T>,
    /// Ring mask dilation in voxels.
    pub dilation: T,
    /// Voxels within this many voxels of a phantom component are left out
    /// of both masks, so the phantom's own edges do not count as artifacts.
    pub exclusion: T,
    /// Supersampling factor for the ground-truth rasterization.
    pub supersample: usize,
}

impl ArtifactConfig<f64> {
    /// Calibrated setup used by the acceptance run: a 48 x 48 x 12 grid of
    /// 0.1 voxels over `[-2.4, 2.4]^2` and a 1.2-tall slab starting at `z = 1`
    /// (apple) or `z = 0` (lemon), with 16 values of `p` in `[0.5, 8]` on a
    /// 25 x 25 lattice of centres spanning `[-1.8, 1.8]^2`.
    pub fn standard(family: Family) -> Result<Self> {
        let z0 = if family.kind() == SurfaceKind::Apple {
            1.0
        } else {
            0.0
        };
        let grid = GridSpec::covering(
            [48, 48, 12],
            Vec3::new(-2.4, -2.4, z0),
            Vec3::new(2.4, 2.4, z0 + 1.2),
        )?;
        let mut params = Vec::with_capacity(16 * 25 * 25);
        for ip in 0..16 {
            for i in 0..25 {
                for j in 0..25 {
                    params.push(RestrictedParams::new(
                        0.5 + 0.5 * ip as f64,
                        -1.8 + 0.15 * i as f64,
                        -1.8 + 0.15 * j as f64,
                    )?);
                }
            }
        }
        Ok(Self {
            grid,
            params,
            quad: QuadratureSpec::new(48, 96)?,
            landweber: LandweberConfig::default(),
            dilation: 2.0,
            exclusion: 2.0,
            supersample: 4,
        })
    }
}

/// Poles of each component: the points where the surface normal is
/// vertical, which are the only places an apple can touch the phantom along
/// its rim.
fn poles<T: Real>(phantom: &PhantomSpec<T>) -> Vec<Vec3<T>> {
    phantom
        .components
        .iter()
        .flat_map(|c| {
            let up = Vec3::new(T::zero(), T::zero(), c.radius);
            [c.center + up, c.center - up]
        })
        .collect()
}

/// Artifact rings predicted for the data set. For the apple these are the
/// rim circles `z = sqrt(t^2 + 1)` passing within `reach` of a pole. The
/// lemon has no artifact set; its control mask is built from the same apple
/// circles moved to the pole height, so both experiments measure the same
/// geometry.
fn predicted_rings<T: Real>(
    family: Family,
    params: &[RestrictedParams<T>],
    poles: &[Vec3<T>],
    reach: T,
) -> Result<Vec<Ring<T>>> {
    let mut rings = Vec::new();
    for rp in params {
        let set = predict_artifacts(Family::RestrictedApple, &ProjectionParams::Restricted(*rp))?;
        for pole in poles {
            for ring in &set.rings {
                let mut ring = *ring;
                if family == Family::RestrictedLemon {
                    ring.center.z = pole.z;
                }
                if ring.distance(pole) <= reach {
                    rings.push(ring);
                }
            }
        }
    }
    Ok(rings)
}

/// Simulates noiseless data from `phantom` with the restricted family,
/// reconstructs by Landweber and compares the error energy on the predicted
/// ring mask with a distance-matched background. Voxels that no surface
/// reaches, and voxels within `exclusion` of the phantom, are left out.
pub fn artifact_experiment<T: Real>(
    phantom: &PhantomSpec<T>,
    family: Family,
    cfg: &ArtifactConfig<T>,
) -> Result<ReconReport<T>> {
    let support = match family {
        Family::RestrictedApple => Region::HalfSpaceZGt1,
        Family::RestrictedLemon => Region::Band {
            zmin: T::zero(),
            zmax: T::one(),
        },
        other => {
            return Err(Error::UnsupportedFamily(format!(
                "artifact experiment needs a restricted family, got {other}"
            )))
        }
    };
    phantom.validate(&support)?;
    let grid = &cfg.grid;
    let plist: Vec<ProjectionParams<T>> = cfg
        .params
        .iter()
        .map(|&p| ProjectionParams::Restricted(p))
        .collect();
    let a = SystemMatrix::assemble(&plist, family.kind(), cfg.quad, grid)?;
    let truth = phantom.rasterize_supersampled(grid, cfg.supersample.max(1));
    let data = a.apply(&truth.values);
    let res = landweber(&a, &data, &cfg.landweber, None)?;
    let volume = VoxelGrid::from_values(*grid, res.solution)?;

    let voxel = grid.spacing.x.max(grid.spacing.y).max(grid.spacing.z);
    let reach = cfg.dilation * voxel;
    let rings = predicted_rings(family, &cfg.params, &poles(phantom), reach)?;
    // voxels no surface reaches carry no information either way
    let covered = a.apply_transpose(&vec![T::one(); a.n_rows()]);
    let eligible: Vec<bool> = (0..grid.len())
        .map(|idx| {
            let x = grid.center_of(idx);
            covered[idx] > T::zero()
                && !phantom
                    .components
                    .iter()
                    .any(|c| norm(&(x - c.center)) <= c.support_radius() + cfg.exclusion * voxel)
        })
        .collect();
    let ring_mask: Vec<bool> = ring_mask(&rings, grid, cfg.dilation)
        .into_iter()
        .zip(&eligible)
        .map(|(m, &e)| m && e)
        .collect();
    let err: Vec<T> = volume
        .values
        .iter()
        .zip(&truth.values)
        .map(|(x, t)| *x - *t)
        .collect();

    // Background is distance-matched: voxels off the ring mask are binned by
    // distance to the nearest component in one-voxel shells, and each shell
    // is weighted by how many ring voxels it holds.
    let shell = |idx: usize| {
        let x = grid.center_of(idx);
        let d = phantom
            .components
            .iter()
            .map(|c| norm(&(x - c.center)) - c.support_radius())
            .fold(T::infinity(), |m, v| m.min(v));
        let d = (d / voxel).to_f64_lossy();
        if d.is_finite() {
            d.max(0.0) as usize
        } else {
            0
        }
    };
    let n_shells = (0..grid.len())
        .filter(|&i| eligible[i])
        .map(shell)
        .max()
        .map_or(0, |m| m + 1);
    let mut ring_sum = vec![T::zero(); n_shells];
    let mut ring_n = vec![0usize; n_shells];
    let mut bg_sum = vec![T::zero(); n_shells];
    let mut bg_n = vec![0usize; n_shells];
    for idx in (0..grid.len()).filter(|&i| eligible[i]) {
        let b = shell(idx);
        let e2 = err[idx] * err[idx];
        if ring_mask[idx] {
            ring_sum[b] += e2;
            ring_n[b] += 1;
        } else {
            bg_sum[b] += e2;
            bg_n[b] += 1;
        }
    }
    let mut ring_total = T::zero();
    let mut bg_total = T::zero();
    let mut matched = 0usize;
    let mut background_voxels = 0usize;
    for b in 0..n_shells {
        if ring_n[b] == 0 || bg_n[b] == 0 {
            continue;
        }
        ring_total += ring_sum[b];
        bg_total += bg_sum[b] / T::from_usize_lossy(bg_n[b]) * T::from_usize_lossy(ring_n[b]);
        matched += ring_n[b];
        background_voxels += bg_n[b];
    }
    let (ring, background) = if matched > 0 {
        let n = T::from_usize_lossy(matched);
        (Some(ring_total / n), Some(bg_total / n))
    } else {
        (None, None)
    };
    let ratio = match (ring, background) {
        (Some(r), Some(b)) if b > T::zero() => Some(r / b),
        _ => None,
    };
    Ok(ReconReport {
        residual_norms: res.residual_norms,
        volume,
        ring_artifact_energy: ring,
        background_energy: background,
        ratio,
        ring_voxels: matched,
        background_voxels,
        step: res.step,
        operator_norm: res.operator_norm,
    })
}
