//! Spindle-torus parameterization: rotation frames, defining functions,
//! parameter-set membership and surface quadrature.
//!
//! A spindle torus is fixed by its squared radius `s`, the tube-centre
//! distance `t`, a centre `x0` and the direction of its axis of revolution,
//! `R(alpha, beta) e3` with `R = Rz(alpha) Rx(beta)`. With `x' = R^T (x - x0)`,
//! `g = sqrt(x'^2 + y'^2)` and `h = |x - x0|^2 + t^2`, the outer (apple) and
//! inner (lemon) sheets are the zero sets of
//!
//! ```text
//! Psi_j = (g + (-1)^j t)^2 + z'^2 - s = h + 2 (-1)^j t g - s,   j = 1 apple, 2 lemon.
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{norm, norm_sq, Mat3, Real, Vec3};

/// Which sheet of the spindle torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    /// Outer sheet, `j = 1`.
    Apple,
    /// Inner sheet, `j = 2`.
    Lemon,
}

impl SurfaceKind {
    /// `(-1)^j`: `-1` for the apple, `+1` for the lemon.
    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            SurfaceKind::Apple => -T::one(),
            SurfaceKind::Lemon => T::one(),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            SurfaceKind::Apple => 1,
            SurfaceKind::Lemon => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Apple => "apple",
            SurfaceKind::Lemon => "lemon",
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "apple" | "1" | "j1" => Ok(SurfaceKind::Apple),
            "lemon" | "2" | "j2" => Ok(SurfaceKind::Lemon),
            other => Err(Error::Parse(format!("unknown surface kind `{other}`"))),
        }
    }
}

/// Full seven-parameter spindle torus plus the sheet selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParams<T: Real> {
    /// Squared radius.
    pub s: T,
    /// Distance from the centre to the tube centre.
    pub t: T,
    pub x0: Vec3<T>,
    /// Azimuth of the axis, in `[0, 2 pi)`.
    pub alpha: T,
    /// Tilt of the axis, in `[0, pi/2]`.
    pub beta: T,
    pub kind: SurfaceKind,
}

impl<T: Real> TorusParams<T> {
    /// Validates `s > t^2 > 0`, reduces `alpha` mod `2 pi` and clamps `beta`
    /// to `[0, pi/2]`.
    pub fn new(s: T, t: T, x0: Vec3<T>, alpha: T, beta: T, kind: SurfaceKind) -> Result<Self> {
        let finite = [s, t, x0.x, x0.y, x0.z, alpha, beta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite torus parameter".into()));
        }
        if t <= T::zero() {
            return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
        }
        if s <= t * t {
            return Err(Error::InvalidParams(format!(
                "s must exceed t^2 (s = {s}, t^2 = {})",
                t * t
            )));
        }
        let two_pi = T::PI() + T::PI();
        let mut alpha = alpha % two_pi;
        if alpha < T::zero() {
            alpha += two_pi;
        }
        let beta = beta.max(T::zero()).min(T::FRAC_PI_2());
        Ok(Self {
            s,
            t,
            x0,
            alpha,
            beta,
            kind,
        })
    }

    /// Axis-aligned torus centred at `x0` (`alpha = beta = 0`).
    pub fn axis_aligned(s: T, t: T, x0: Vec3<T>, kind: SurfaceKind) -> Result<Self> {
        Self::new(s, t, x0, T::zero(), T::zero(), kind)
    }

    pub fn with_kind(mut self, kind: SurfaceKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn frame(&self) -> LocalFrame<T> {
        rotation_matrix(self.alpha, self.beta)
    }
}

/// Rotation `R(alpha, beta)` with the rows of `R^T`, their angle derivatives
/// and the rank-two projector `A = r1^T r1 + r2^T r2`.
///
/// Row vectors of `R^T` are stored as column vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame<T: Real> {
    pub rotation: Mat3<T>,
    pub r1: Vec3<T>,
    pub r2: Vec3<T>,
    pub r3: Vec3<T>,
    pub r1_alpha: Vec3<T>,
    pub r2_alpha: Vec3<T>,
    pub r1_beta: Vec3<T>,
    pub r2_beta: Vec3<T>,
    /// Orthogonal projector onto `span(r1, r2)`.
    pub projector: Mat3<T>,
}

impl<T: Real> LocalFrame<T> {
    /// `x' = R^T x_T`.
    #[inline]
    pub fn to_local(&self, xt: &Vec3<T>) -> Vec3<T> {
        Vec3::new(self.r1.dot(xt), self.r2.dot(xt), self.r3.dot(xt))
    }

    /// `R x'`.
    #[inline]
    pub fn to_world(&self, local: &Vec3<T>) -> Vec3<T> {
        self.rotation * local
    }

    /// Unit direction of the axis of revolution, `R e3`.
    #[inline]
    pub fn axis(&self) -> Vec3<T> {
        self.r3
    }
}

/// Builds `R = Rz(alpha) Rx(beta)` and its derived quantities.
pub fn rotation_matrix<T: Real>(alpha: T, beta: T) -> LocalFrame<T> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let zero = T::zero();

    let r1 = Vec3::new(ca, sa, zero);
    let r2 = Vec3::new(-sa * cb, ca * cb, sb);
    let r3 = Vec3::new(sa * sb, -ca * sb, cb);
    let rotation = Mat3::from_columns(&[r1, r2, r3]);

    let r1_alpha = Vec3::new(-sa, ca, zero);
    let r2_alpha = Vec3::new(-ca * cb, -sa * cb, zero);
    let r1_beta = Vec3::zeros();
    let r2_beta = Vec3::new(sa * sb, -ca * sb, cb);

    let projector = r1 * r1.transpose() + r2 * r2.transpose();

    LocalFrame {
        rotation,
        r1,
        r2,
        r3,
        r1_alpha,
        r2_alpha,
        r1_beta,
        r2_beta,
        projector,
    }
}

/// Returns `(g, h)` at `x`: the distance from the axis of revolution and
/// `|x - x0|^2 + t^2`.
pub fn scalar_fields<T: Real>(params: &TorusParams<T>, x: &Vec3<T>) -> (T, T) {
    let frame = params.frame();
    scalar_fields_in(params, &frame, x)
}

#[inline]
pub(crate) fn scalar_fields_in<T: Real>(
    params: &TorusParams<T>,
    frame: &LocalFrame<T>,
    x: &Vec3<T>,
) -> (T, T) {
    let xt = x - params.x0;
    let local = frame.to_local(&xt);
    let g = (local.x * local.x + local.y * local.y).sqrt();
    let h = norm_sq(&xt) + params.t * params.t;
    (g, h)
}

/// Defining function `Psi_j`, evaluated in the squared form
/// `(g + (-1)^j t)^2 + z'^2 - s`.
pub fn psi<T: Real>(params: &TorusParams<T>, x: &Vec3<T>) -> Result<T> {
    let frame = params.frame();
    let local = frame.to_local(&(x - params.x0));
    let g = (local.x * local.x + local.y * local.y).sqrt();
    if g <= T::zero() {
        return Err(Error::DegeneratePoint);
    }
    let r = g + params.kind.sign::<T>() * params.t;
    Ok(r * r + local.z * local.z - params.s)
}

/// The expanded form `h + 2 (-1)^j t g - s`. Defined on the axis as well.
pub fn psi_expanded<T: Real>(params: &TorusParams<T>, x: &Vec3<T>) -> T {
    let (g, h) = scalar_fields(params, x);
    h + T::lit(2.0) * params.kind.sign::<T>() * params.t * g - params.s
}

/// Closed-form gradient `2 (I + (-1)^j (t/g) A) x_T`.
pub fn grad_psi<T: Real>(params: &TorusParams<T>, x: &Vec3<T>) -> Result<Vec3<T>> {
    let frame = params.frame();
    grad_psi_in(params, &frame, x)
}

pub(crate) fn grad_psi_in<T: Real>(
    params: &TorusParams<T>,
    frame: &LocalFrame<T>,
    x: &Vec3<T>,
) -> Result<Vec3<T>> {
    let xt = x - params.x0;
    let (g, _) = scalar_fields_in(params, frame, x);
    if g <= T::zero() {
        return Err(Error::DegeneratePoint);
    }
    let coeff = params.kind.sign::<T>() * params.t / g;
    let two = T::lit(2.0);
    Ok((xt + frame.projector * xt * coeff) * two)
}

/// The two self-intersection points `x0 +/- sqrt(s - t^2) R e3`.
pub fn singular_points<T: Real>(params: &TorusParams<T>) -> Result<(Vec3<T>, Vec3<T>)> {
    let gap = params.s - params.t * params.t;
    if gap <= T::zero() {
        return Err(Error::InvalidParams(format!(
            "s must exceed t^2 (s = {}, t = {})",
            params.s, params.t
        )));
    }
    let offset = params.frame().axis() * gap.sqrt();
    Ok((params.x0 + offset, params.x0 - offset))
}

/// Whether the parameters are admissible: `s > t^2 > 0` and both singular
/// points avoid the closed unit ball.
pub fn in_parameter_set_y<T: Real>(params: &TorusParams<T>) -> bool {
    if !(params.t > T::zero()) {
        return false;
    }
    match singular_points(params) {
        Ok((a, b)) => norm(&a) > T::one() && norm(&b) > T::one(),
        Err(_) => false,
    }
}

/// Membership test used to clip surfaces to a region.
pub trait RegionPredicate<T: Real>: Sync {
    fn contains(&self, x: &Vec3<T>) -> bool;
}

impl<T: Real, F> RegionPredicate<T> for F
where
    F: Fn(&Vec3<T>) -> bool + Sync,
{
    fn contains(&self, x: &Vec3<T>) -> bool {
        self(x)
    }
}

/// Node counts of the tensor-product surface rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n_psi: usize,
    pub n_theta: usize,
}

impl QuadratureSpec {
    pub fn new(n_psi: usize, n_theta: usize) -> Result<Self> {
        if n_psi < 2 || n_theta < 2 {
            return Err(Error::InvalidParams(format!(
                "quadrature needs at least 2x2 nodes, got {n_psi}x{n_theta}"
            )));
        }
        Ok(Self { n_psi, n_theta })
    }

    pub fn len(&self) -> usize {
        self.n_psi * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One surface node with its area weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<T: Real> {
    pub x: Vec3<T>,
    pub x_t: Vec3<T>,
    pub x_local: Vec3<T>,
    /// Revolution angle.
    pub theta: T,
    /// Generator-circle angle.
    pub psi: T,
    pub weight: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceQuadrature<T: Real> {
    pub points: Vec<SurfacePoint<T>>,
}

impl<T: Real> SurfaceQuadrature<T> {
    pub fn total_weight(&self) -> T {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Weighted sum of `f` over the nodes with nonzero weight.
    pub fn integrate(&self, mut f: impl FnMut(&Vec3<T>) -> T) -> T {
        let mut acc = T::zero();
        for p in &self.points {
            if p.weight != T::zero() {
                acc += p.weight * f(&p.x);
            }
        }
        acc
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Half-opening of the generator arc: `psi` ranges over `[-psi_max, psi_max]`.
pub fn generator_half_angle<T: Real>(params: &TorusParams<T>) -> T {
    let ratio = params.t / params.s.sqrt();
    match params.kind {
        SurfaceKind::Apple => (-ratio).acos(),
        SurfaceKind::Lemon => ratio.acos(),
    }
}

/// Distance from the axis along the generator circle.
#[inline]
pub fn generator_radius<T: Real>(params: &TorusParams<T>, psi: T) -> T {
    params.s.sqrt() * psi.cos() - params.kind.sign::<T>() * params.t
}

/// Tensor-product rule on the surface of revolution: trapezoid in the
/// generator angle, midpoint in the revolution angle. Nodes outside `clip`
/// keep their position but get zero weight. The arc endpoints are the
/// singular points and carry zero weight.
pub fn parametrize_surface<T: Real>(
    params: &TorusParams<T>,
    quad: QuadratureSpec,
    clip: &impl RegionPredicate<T>,
) -> Result<SurfaceQuadrature<T>> {
    if params.s <= params.t * params.t || !(params.t > T::zero()) {
        return Err(Error::InvalidParams(format!(
            "s must exceed t^2 > 0 (s = {}, t = {})",
            params.s, params.t
        )));
    }
    QuadratureSpec::new(quad.n_psi, quad.n_theta)?;

    let frame = params.frame();
    let root_s = params.s.sqrt();
    let psi_max = generator_half_angle(params);
    let d_psi = (psi_max + psi_max) / T::from_usize_lossy(quad.n_psi - 1);
    let d_theta = (T::PI() + T::PI()) / T::from_usize_lossy(quad.n_theta);
    let half = T::lit(0.5);

    let mut points = Vec::with_capacity(quad.len());
    for k in 0..quad.n_psi {
        let endpoint = k == 0 || k + 1 == quad.n_psi;
        let psi = if k + 1 == quad.n_psi {
            psi_max
        } else {
            -psi_max + d_psi * T::from_usize_lossy(k)
        };
        let rho = if endpoint {
            T::zero()
        } else {
            generator_radius(params, psi).max(T::zero())
        };
        let height = root_s * psi.sin();
        let psi_weight = if endpoint { d_psi * half } else { d_psi };
        for m in 0..quad.n_theta {
            let theta = (T::from_usize_lossy(m) + half) * d_theta;
            let (st, ct) = theta.sin_cos();
            let x_local = Vec3::new(rho * ct, rho * st, height);
            let x_t = frame.to_world(&x_local);
            let x = params.x0 + x_t;
            let weight = if clip.contains(&x) {
                root_s * rho * psi_weight * d_theta
            } else {
                T::zero()
            };
            points.push(SurfacePoint {
                x,
                x_t,
                x_local,
                theta,
                psi,
                weight,
            });
        }
    }
    Ok(SurfaceQuadrature { points })
}
