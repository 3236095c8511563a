//! Apple and lemon surface transforms, their batched forms and the exact
//! discrete adjoint.
//!
//! Integrals use the plain Euclidean area element on the surface (the
//! `|grad Psi| delta(Psi)` weight reduces to it by the coarea formula).
//! Volumes are sampled trilinearly at quadrature nodes, so the adjoint is an
//! eight-point splat of the same weights and the pair passes the dot-product
//! test to rounding.

mod grid;

use rayon::prelude::*;

pub use grid::{GridSpec, ScalarField, VoxelGrid};

use crate::error::{Error, Result};
use crate::geometry::{
    in_parameter_set_y, parametrize_surface, QuadratureSpec, RegionPredicate, SurfaceKind,
    SurfaceQuadrature, TorusParams,
};
use crate::phantoms::Region;
use crate::scalar::{Real, Vec3};

/// Parameters per worker chunk in the adjoint. Fixed so the merge order, and
/// hence the rounding, does not depend on the thread count.
const ADJOINT_CHUNK: usize = 8;

/// Translated family with a vertical axis: `p = 4 t^2`, centre `(x0, y0, 0)`
/// and `s = t^2 + 1`, so both singular points sit at `z = +/- 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedParams<T: Real> {
    pub p: T,
    pub x0: T,
    pub y0: T,
}

impl<T: Real> RestrictedParams<T> {
    pub fn new(p: T, x0: T, y0: T) -> Result<Self> {
        if !(p > T::zero()) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("p must be positive, got {p}")));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::InvalidParams("non-finite translation".into()));
        }
        Ok(Self { p, x0, y0 })
    }

    pub fn t(&self) -> T {
        (self.p / T::lit(4.0)).sqrt()
    }

    pub fn s(&self) -> T {
        self.p / T::lit(4.0) + T::one()
    }

    /// Height of the artifact rings, `sqrt(t^2 + 1)`.
    pub fn r(&self) -> T {
        self.s().sqrt()
    }

    pub fn center(&self) -> Vec3<T> {
        Vec3::new(self.x0, self.y0, T::zero())
    }

    pub fn torus(&self, kind: SurfaceKind) -> Result<TorusParams<T>> {
        TorusParams::axis_aligned(self.s(), self.t(), self.center(), kind)
    }

    /// `{z > 1}` for the apple, the unit ball about the centre for the lemon.
    pub fn region(&self, kind: SurfaceKind) -> Region<T> {
        match kind {
            SurfaceKind::Apple => Region::HalfSpaceZGt1,
            SurfaceKind::Lemon => Region::BallAround {
                center: self.center(),
                radius: T::one(),
            },
        }
    }
}

/// One entry of a parameter list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionParams<T: Real> {
    Full(TorusParams<T>),
    Restricted(RestrictedParams<T>),
}

impl<T: Real> ProjectionParams<T> {
    /// The surface for `kind` and its clipping region. Full-family entries
    /// must lie in the admissible set and are clipped to the unit ball.
    pub fn surface(&self, kind: SurfaceKind) -> Result<(TorusParams<T>, Region<T>)> {
        match self {
            ProjectionParams::Full(tp) => {
                let tp = tp.with_kind(kind);
                if !in_parameter_set_y(&tp) {
                    return Err(Error::InvalidParams(format!(
                        "singular points of {tp:?} meet the closed unit ball"
                    )));
                }
                Ok((tp, Region::UnitBall))
            }
            ProjectionParams::Restricted(rp) => Ok((rp.torus(kind)?, rp.region(kind))),
        }
    }

    pub fn quadrature(
        &self,
        kind: SurfaceKind,
        quad: QuadratureSpec,
    ) -> Result<SurfaceQuadrature<T>> {
        let (tp, region) = self.surface(kind)?;
        parametrize_surface(&tp, quad, &region)
    }
}

impl<T: Real> From<TorusParams<T>> for ProjectionParams<T> {
    fn from(p: TorusParams<T>) -> Self {
        ProjectionParams::Full(p)
    }
}

impl<T: Real> From<RestrictedParams<T>> for ProjectionParams<T> {
    fn from(p: RestrictedParams<T>) -> Self {
        ProjectionParams::Restricted(p)
    }
}

/// Transform values aligned with their parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataGrid<T: Real> {
    pub params: Vec<ProjectionParams<T>>,
    pub values: Vec<T>,
}

impl<T: Real> DataGrid<T> {
    pub fn new(params: Vec<ProjectionParams<T>>, values: Vec<T>) -> Result<Self> {
        if params.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} parameters but {} values",
                params.len(),
                values.len()
            )));
        }
        Ok(Self { params, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &[T]) -> T {
        self.values.iter().zip(other).map(|(a, b)| *a * *b).sum()
    }
}

/// Integral of `f` over the part of the surface inside `clip`.
pub fn surface_integral<T: Real>(
    f: &impl ScalarField<T>,
    params: &TorusParams<T>,
    quad: QuadratureSpec,
    clip: &impl RegionPredicate<T>,
) -> Result<T> {
    let q = parametrize_surface(params, quad, clip)?;
    Ok(q.integrate(|x| f.value(x)))
}

fn full_transform<T: Real>(
    f: &impl ScalarField<T>,
    params: &TorusParams<T>,
    kind: SurfaceKind,
    quad: QuadratureSpec,
) -> Result<T> {
    let (tp, region) = ProjectionParams::Full(*params).surface(kind)?;
    surface_integral(f, &tp, quad, &region)
}

/// Integral of `f` over the apple of `params` inside the unit ball.
pub fn apple_transform<T: Real>(
    f: &impl ScalarField<T>,
    params: &TorusParams<T>,
    quad: QuadratureSpec,
) -> Result<T> {
    full_transform(f, params, SurfaceKind::Apple, quad)
}

/// Integral of `f` over the lemon of `params` inside the unit ball.
pub fn lemon_transform<T: Real>(
    f: &impl ScalarField<T>,
    params: &TorusParams<T>,
    quad: QuadratureSpec,
) -> Result<T> {
    full_transform(f, params, SurfaceKind::Lemon, quad)
}

/// Apple clipped to `{z > 1}` or lemon clipped to the unit ball about
/// `(x0, y0, 0)`.
pub fn restricted_transform<T: Real>(
    f: &impl ScalarField<T>,
    rp: &RestrictedParams<T>,
    kind: SurfaceKind,
    quad: QuadratureSpec,
) -> Result<T> {
    let tp = rp.torus(kind)?;
    surface_integral(f, &tp, quad, &rp.region(kind))
}

fn tag(index: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Element {
        index,
        source: Box::new(e),
    }
}

/// Applies the transform to every parameter. Output order follows `plist`
/// and does not depend on the worker count.
pub fn forward_project<T: Real, F>(
    f: &F,
    plist: &[ProjectionParams<T>],
    kind: SurfaceKind,
    quad: QuadratureSpec,
) -> Result<DataGrid<T>>
where
    F: ScalarField<T> + Sync,
{
    let values = plist
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let q = p.quadrature(kind, quad).map_err(tag(i))?;
            Ok(q.integrate(|x| f.value(x)))
        })
        .collect::<Result<Vec<T>>>()?;
    DataGrid::new(plist.to_vec(), values)
}

/// Transpose of [`forward_project`] applied to a voxel volume on `grid`.
pub fn adjoint_project<T: Real>(
    data: &DataGrid<T>,
    kind: SurfaceKind,
    quad: QuadratureSpec,
    grid: &GridSpec<T>,
) -> Result<VoxelGrid<T>> {
    let partials = data
        .params
        .par_chunks(ADJOINT_CHUNK)
        .zip(data.values.par_chunks(ADJOINT_CHUNK))
        .enumerate()
        .map(|(c, (ps, vs))| {
            let mut acc = VoxelGrid::zeros(*grid);
            for (k, (p, &d)) in ps.iter().zip(vs).enumerate() {
                let q = p
                    .quadrature(kind, quad)
                    .map_err(tag(c * ADJOINT_CHUNK + k))?;
                if d == T::zero() {
                    continue;
                }
                for node in &q.points {
                    if node.weight != T::zero() {
                        acc.splat(&node.x, node.weight * d);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_in_order(grid, partials))
}

fn merge_in_order<T: Real>(grid: &GridSpec<T>, partials: Vec<VoxelGrid<T>>) -> VoxelGrid<T> {
    let mut out = VoxelGrid::zeros(*grid);
    for part in partials {
        for (o, v) in out.values.iter_mut().zip(part.values) {
            *o += v;
        }
    }
    out
}

/// Sparse rows of the discrete forward operator on a fixed grid, assembled
/// once for iterative reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix<T: Real> {
    pub grid: GridSpec<T>,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> SystemMatrix<T> {
    pub fn assemble(
        plist: &[ProjectionParams<T>],
        kind: SurfaceKind,
        quad: QuadratureSpec,
        grid: &GridSpec<T>,
    ) -> Result<Self> {
        let rows = plist
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let q = p.quadrature(kind, quad).map_err(tag(i))?;
                let mut row = Vec::new();
                for node in q.points.iter().filter(|n| n.weight != T::zero()) {
                    if let Some(st) = grid.trilinear_stencil(&node.x) {
                        row.extend(
                            st.iter()
                                .filter(|e| e.1 != T::zero())
                                .map(|&(v, w)| (v, w * node.weight)),
                        );
                    }
                }
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
                for (v, w) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == v => last.1 += w,
                        _ => merged.push((v, w)),
                    }
                }
                Ok(merged)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: *grid, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|&(v, w)| w * x[v]).sum())
            .collect()
    }

    pub fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        let n = self.n_cols();
        let partials: Vec<Vec<T>> = self
            .rows
            .par_chunks(ADJOINT_CHUNK * 4)
            .zip(y.par_chunks(ADJOINT_CHUNK * 4))
            .map(|(rows, ys)| {
                let mut acc = vec![T::zero(); n];
                for (row, &d) in rows.iter().zip(ys) {
                    if d != T::zero() {
                        for &(v, w) in row {
                            acc[v] += w * d;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![T::zero(); n];
        for part in partials {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm_sq;

    fn quad(n: usize) -> QuadratureSpec {
        QuadratureSpec::new(n, n).unwrap()
    }

    #[test]
    fn restricted_derived_quantities() {
        let rp = RestrictedParams::new(4.0f64, 0.5, -0.25).unwrap();
        assert_eq!(rp.t(), 1.0);
        assert_eq!(rp.s(), 2.0);
        assert!((rp.r() - 2f64.sqrt()).abs() < 1e-15);
        assert!(RestrictedParams::new(0.0f64, 0.0, 0.0).is_err());
    }

    #[test]
    fn restricted_surface_identities() {
        let rp = RestrictedParams::new(2.5f64, 0.3, -0.2).unwrap();
        let t = rp.t();
        for kind in [SurfaceKind::Apple, SurfaceKind::Lemon] {
            let q = parametrize_surface(&rp.torus(kind).unwrap(), quad(33), &|_: &Vec3<f64>| true)
                .unwrap();
            for n in q.points.iter().filter(|n| n.weight > 0.0) {
                let xt = n.x - rp.center();
                let g = xt.x * xt.x + xt.y * xt.y;
                let h = norm_sq(&xt) - 1.0;
                let rho = g.sqrt();
                let expect = match kind {
                    SurfaceKind::Apple => 2.0 * t * rho,
                    SurfaceKind::Lemon => -2.0 * t * rho,
                };
                assert!(
                    (h - expect).abs() < 1e-9,
                    "{kind}: h = {h}, expected {expect}"
                );
                assert!((h * h / g - rp.p).abs() < 1e-9 * rp.p.max(1.0));
            }
        }
    }

    #[test]
    fn zero_field_transforms_vanish() {
        let zero = |_: &Vec3<f64>| 0.0;
        let tp = TorusParams::axis_aligned(4.0, 1.0, Vec3::new(0.0, 0.0, 0.3), SurfaceKind::Apple)
            .unwrap();
        assert_eq!(apple_transform(&zero, &tp, quad(16)).unwrap(), 0.0);
        assert_eq!(lemon_transform(&zero, &tp, quad(16)).unwrap(), 0.0);
        let rp = RestrictedParams::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            restricted_transform(&zero, &rp, SurfaceKind::Apple, quad(16)).unwrap(),
            0.0
        );
    }

    #[test]
    fn inadmissible_params_are_rejected() {
        let tp = TorusParams::axis_aligned(1.21, 1.0, Vec3::zeros(), SurfaceKind::Apple).unwrap();
        let one = |_: &Vec3<f64>| 1.0;
        assert!(matches!(
            apple_transform(&one, &tp, quad(8)),
            Err(Error::InvalidParams(_))
        ));
        let plist = vec![
            ProjectionParams::Full(
                TorusParams::axis_aligned(4.0, 1.0, Vec3::zeros(), SurfaceKind::Apple).unwrap(),
            ),
            ProjectionParams::Full(tp),
        ];
        match forward_project(&one, &plist, SurfaceKind::Apple, quad(8)) {
            Err(Error::Element { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected element error, got {other:?}"),
        }
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let tp = TorusParams::axis_aligned(4.0, 1.0, Vec3::zeros(), SurfaceKind::Lemon).unwrap();
        // The lemon stays within distance sqrt(s - t^2) of its centre along
        // the axis and within 1 radially; a blob far off the surface sees nothing.
        let f = |x: &Vec3<f64>| {
            if (x - Vec3::new(0.0, 0.0, 0.0)).norm() < 0.2 {
                1.0
            } else {
                0.0
            }
        };
        assert_eq!(lemon_transform(&f, &tp, quad(64)).unwrap(), 0.0);
    }

    #[test]
    fn empty_and_single_batches() {
        let one = |_: &Vec3<f64>| 1.0;
        let d = forward_project(&one, &[], SurfaceKind::Lemon, quad(8)).unwrap();
        assert!(d.is_empty());
        let rp = RestrictedParams::new(1.0, 0.1, 0.0).unwrap();
        let single = forward_project(&one, &[rp.into()], SurfaceKind::Lemon, quad(24)).unwrap();
        let direct = restricted_transform(&one, &rp, SurfaceKind::Lemon, quad(24)).unwrap();
        assert_eq!(single.values[0], direct);
    }

    #[test]
    fn zero_data_adjoint_is_zero() {
        let g = GridSpec::cube(6, 1.0).unwrap();
        let rp = RestrictedParams::new(1.0f64, 0.1, 0.0).unwrap();
        let d = DataGrid::new(vec![rp.into(); 3], vec![0.0; 3]).unwrap();
        let v = adjoint_project(&d, SurfaceKind::Lemon, quad(12), &g).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn system_matrix_matches_direct_operators() {
        let g = GridSpec::cube(6, 1.0).unwrap();
        let plist: Vec<ProjectionParams<f64>> = (0..5)
            .map(|i| {
                RestrictedParams::new(0.5 + 0.3 * i as f64, 0.05 * i as f64, -0.1)
                    .unwrap()
                    .into()
            })
            .collect();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 11) as f64) / 11.0).collect();
        let vol = VoxelGrid::from_values(g, vals).unwrap();
        let m = SystemMatrix::assemble(&plist, SurfaceKind::Lemon, quad(20), &g).unwrap();
        let direct = forward_project(&vol, &plist, SurfaceKind::Lemon, quad(20)).unwrap();
        for (a, b) in m.apply(&vol.values).iter().zip(&direct.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let d = DataGrid::new(plist.clone(), vec![1.0, -2.0, 0.5, 0.0, 3.0]).unwrap();
        let back = adjoint_project(&d, SurfaceKind::Lemon, quad(20), &g).unwrap();
        for (a, b) in m.apply_transpose(&d.values).iter().zip(&back.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
