//! Closed-form microlocal quantities of the apple and lemon transforms.
//!
//! For the full family the phase is `Phi_j = sigma * Psi_j` with
//! `Psi_j = h + 2 (-1)^j t g - s`, and the canonical relation is
//! parameterized by `(sigma; t, alpha, beta, x0; x)` with `s` solved from
//! `Psi_j = 0`. The left projection lists `d_s Phi`, the base coordinates
//! `(t, alpha, beta, x0)`, `grad_x0 Phi`, `d_t Phi`, `d_alpha Phi`,
//! `d_beta Phi` and `s`.
//!
//! Sign convention: `d_alpha Phi_j = 2 (-1)^j sigma t / g * Q_alpha` with
//! `Q_alpha = x_T^T (r1a r1^T + r2a r2^T) x_T`, i.e. negative coefficient for
//! the apple and positive for the lemon. This is what differentiating
//! `Psi_j` gives and what the finite-difference oracle confirms.

mod artifacts;
mod bolker;
mod restricted;

pub use artifacts::{
    cone_angle_degrees, hyperboloid_residual, predict_artifacts, ring_mask, ArtifactKind,
    ArtifactSet, Family, Ring,
};
pub use bolker::{bolker_scan, BolkerReport, Collision, ScanConfig, ScanRegion};
pub use restricted::{
    amplitude_restricted, det_m3, det_m3_closed, det_restricted_jacobian, m3_matrix, restricted_m2,
    restricted_phase_gradient, restricted_projection, restricted_scalars,
    CanonicalSampleRestricted, RestrictedScalars,
};

use crate::error::{Error, Result};
use crate::geometry::{LocalFrame, SurfaceKind};
use crate::scalar::{det3, Mat3, Real, Vec3};

/// A point `(sigma; t, x0, alpha, beta; x)` of the full canonical relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalSampleFull<T: Real> {
    pub sigma: T,
    pub t: T,
    pub x0: Vec3<T>,
    pub alpha: T,
    pub beta: T,
    pub x: Vec3<T>,
}

impl<T: Real> CanonicalSampleFull<T> {
    pub fn frame(&self) -> LocalFrame<T> {
        crate::geometry::rotation_matrix(self.alpha, self.beta)
    }

    /// `s` for which `x` lies on the surface of `kind`.
    pub fn s(&self, kind: SurfaceKind) -> Result<T> {
        Ok(FullState::new(kind, self)?.s)
    }
}

/// All first derivatives of `sigma * Psi_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDerivatives<T: Real> {
    pub d_s: T,
    pub d_t: T,
    pub d_alpha: T,
    pub d_beta: T,
    pub grad_x0: Vec3<T>,
    pub grad_x: Vec3<T>,
}

/// Shared intermediate quantities for one sample.
struct FullState<T: Real> {
    frame: LocalFrame<T>,
    sign: T,
    xt: Vec3<T>,
    local: Vec3<T>,
    g: T,
    s: T,
    a_xt: Vec3<T>,
}

impl<T: Real> FullState<T> {
    fn new(kind: SurfaceKind, c: &CanonicalSampleFull<T>) -> Result<Self> {
        let frame = c.frame();
        let xt = c.x - c.x0;
        let local = frame.to_local(&xt);
        let g = (local.x * local.x + local.y * local.y).sqrt();
        if !(g > T::zero()) {
            return Err(Error::DegeneratePoint);
        }
        let sign = kind.sign::<T>();
        let h = xt.dot(&xt) + c.t * c.t;
        let s = h + T::lit(2.0) * sign * c.t * g;
        let a_xt = frame.projector * xt;
        Ok(Self {
            frame,
            sign,
            xt,
            local,
            g,
            s,
            a_xt,
        })
    }

    /// `x_T^T (ra r1^T + rb r2^T) x_T` for a pair of row derivatives.
    fn q(&self, ra: &Vec3<T>, rb: &Vec3<T>) -> T {
        self.local.x * ra.dot(&self.xt) + self.local.y * rb.dot(&self.xt)
    }

    /// `(P + P^T) x_T` for `P = ra r1^T + rb r2^T`.
    fn sym_p_xt(&self, ra: &Vec3<T>, rb: &Vec3<T>) -> Vec3<T> {
        let f = &self.frame;
        ra * self.local.x + rb * self.local.y + f.r1 * ra.dot(&self.xt) + f.r2 * rb.dot(&self.xt)
    }
}

pub fn phase_derivatives_full<T: Real>(
    kind: SurfaceKind,
    c: &CanonicalSampleFull<T>,
) -> Result<PhaseDerivatives<T>> {
    let st = FullState::new(kind, c)?;
    let two = T::lit(2.0);
    let f = &st.frame;
    let coeff = two * st.sign * c.sigma * c.t / st.g;
    let grad_x = (st.xt + st.a_xt * (st.sign * c.t / st.g)) * (two * c.sigma);
    Ok(PhaseDerivatives {
        d_s: -c.sigma,
        d_t: two * c.sigma * (c.t + st.sign * st.g),
        d_alpha: coeff * st.q(&f.r1_alpha, &f.r2_alpha),
        d_beta: coeff * st.q(&f.r1_beta, &f.r2_beta),
        grad_x0: -grad_x,
        grad_x,
    })
}

/// Components of the full left projection, in order: `d_s Phi, t, alpha,
/// beta, x0 (3), grad_x0 Phi (3), d_t Phi, d_alpha Phi, d_beta Phi, s`.
pub fn left_projection_full<T: Real>(
    kind: SurfaceKind,
    c: &CanonicalSampleFull<T>,
) -> Result<[T; 14]> {
    let d = phase_derivatives_full(kind, c)?;
    let s = c.s(kind)?;
    Ok([
        d.d_s,
        c.t,
        c.alpha,
        c.beta,
        c.x0.x,
        c.x0.y,
        c.x0.z,
        d.grad_x0.x,
        d.grad_x0.y,
        d.grad_x0.z,
        d.d_t,
        d.d_alpha,
        d.d_beta,
        s,
    ])
}

/// `I + (-1)^j (t/g) A`.
pub fn gradient_operator<T: Real>(
    kind: SurfaceKind,
    t_over_g: T,
    frame: &LocalFrame<T>,
) -> Mat3<T> {
    Mat3::identity() + frame.projector * (kind.sign::<T>() * t_over_g)
}

/// Closed form of `det(I + (-1)^j (t/g) A) = (1 + (-1)^j t/g)^2`.
pub fn det_gradient_operator_closed<T: Real>(kind: SurfaceKind, t_over_g: T) -> T {
    let v = T::one() + kind.sign::<T>() * t_over_g;
    v * v
}

/// Analytic `D_x (grad_x0 Phi_j)`.
pub fn gradx0_jacobian<T: Real>(kind: SurfaceKind, c: &CanonicalSampleFull<T>) -> Result<Mat3<T>> {
    let st = FullState::new(kind, c)?;
    let a = st.frame.projector;
    let outer = st.a_xt * st.a_xt.transpose() / (st.g * st.g);
    let inner = (a - outer) * (st.sign * c.t / st.g);
    Ok((Mat3::identity() + inner) * (-T::lit(2.0) * c.sigma))
}

/// `-(2 sigma)^3 (1 + (-1)^j t/g)`: zero on the cylinder `g = t` for the
/// apple, never zero for the lemon.
pub fn det_gradx0_block<T: Real>(kind: SurfaceKind, c: &CanonicalSampleFull<T>) -> Result<T> {
    let st = FullState::new(kind, c)?;
    let two_sigma = T::lit(2.0) * c.sigma;
    Ok(-(two_sigma * two_sigma * two_sigma) * (T::one() + st.sign * c.t / st.g))
}

/// Analytic gradients in `x` of `d_t Phi`, `d_alpha Phi`, `d_beta Phi` and
/// `s`, in that order.
pub fn projection_x_gradients<T: Real>(
    kind: SurfaceKind,
    c: &CanonicalSampleFull<T>,
) -> Result<[Vec3<T>; 4]> {
    let st = FullState::new(kind, c)?;
    let f = &st.frame;
    let two = T::lit(2.0);
    let g3 = st.g * st.g * st.g;
    let d_t = st.a_xt * (two * c.sigma * st.sign / st.g);
    let angle = |ra: &Vec3<T>, rb: &Vec3<T>| {
        let q = st.q(ra, rb);
        (st.sym_p_xt(ra, rb) / st.g - st.a_xt * (q / g3)) * (two * c.sigma * st.sign * c.t)
    };
    let s = (st.xt + st.a_xt * (st.sign * c.t / st.g)) * two;
    Ok([
        d_t,
        angle(&f.r1_alpha, &f.r2_alpha),
        angle(&f.r1_beta, &f.r2_beta),
        s,
    ])
}

/// A point on the cylinder `g = t` around the torus axis, in the local frame
/// `(t cos theta, t sin theta, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderPoint<T: Real> {
    pub theta: T,
    pub z: T,
    pub t: T,
}

impl<T: Real> CylinderPoint<T> {
    pub fn local(&self) -> Vec3<T> {
        Vec3::new(self.t * self.theta.cos(), self.t * self.theta.sin(), self.z)
    }

    /// The canonical sample with base `(t, x0, alpha, beta)` at this point.
    pub fn sample(&self, sigma: T, x0: Vec3<T>, alpha: T, beta: T) -> CanonicalSampleFull<T> {
        let frame = crate::geometry::rotation_matrix(alpha, beta);
        CanonicalSampleFull {
            sigma,
            t: self.t,
            x0,
            alpha,
            beta,
            x: x0 + frame.to_world(&self.local()),
        }
    }
}

fn check_on_cylinder<T: Real>(c: &CanonicalSampleFull<T>) -> Result<FullState<T>> {
    let st = FullState::new(SurfaceKind::Apple, c)?;
    let tol = T::lit(1e-9) * c.t.max(T::one());
    if (st.g - c.t).abs() > tol {
        return Err(Error::InvalidSample(format!(
            "point is off the cylinder g = t (g = {}, t = {})",
            st.g, c.t
        )));
    }
    Ok(st)
}

/// The scalar `x_T^T (r1a r1^T + r2a r2^T) x_T`; on the cylinder it equals
/// `-t z' sin(beta) cos(theta)`.
pub fn cylinder_alpha_scalar<T: Real>(c: &CanonicalSampleFull<T>) -> Result<T> {
    let st = FullState::new(SurfaceKind::Apple, c)?;
    Ok(st.q(&st.frame.r1_alpha, &st.frame.r2_alpha))
}

/// The reference 3x3 matrix for the rows `(d_t Phi_1, d_alpha Phi_1, s)` on
/// the cylinder `g = t`:
///
/// ```text
/// [ -(2 sigma/g) (A x_T)^T                                   ]
/// [ 2 sigma [ (2t/g) P_a x_T - (t/g^3) Q_a A x_T ]^T          ]
/// [ 2 (x_T - (t/g) A x_T)^T                                  ]
/// ```
///
/// with `P_a = r1a r1^T + r2a r2^T` and `Q_a = x_T^T P_a x_T`. Its
/// determinant is `-16 sigma^2 z' t cos(beta)`. This matrix is not the
/// Jacobian of those rows (the gradient of `x_T^T P_a x_T` is
/// `(P_a + P_a^T) x_T`, not `2 P_a x_T`); [`true_cylinder_minors`] gives the
/// actual Jacobian minors.
pub fn m_cylinder_matrix<T: Real>(c: &CanonicalSampleFull<T>) -> Result<Mat3<T>> {
    let st = check_on_cylinder(c)?;
    let f = &st.frame;
    let two = T::lit(2.0);
    let g = st.g;
    let t = c.t;
    let p_xt = f.r1_alpha * st.local.x + f.r2_alpha * st.local.y;
    let q = st.q(&f.r1_alpha, &f.r2_alpha);
    let row1 = st.a_xt * (-two * c.sigma / g);
    let row2 = (p_xt * (two * t / g) - st.a_xt * (t * q / (g * g * g))) * (two * c.sigma);
    let row3 = (st.xt - st.a_xt * (t / g)) * two;
    Ok(Mat3::from_rows(&[
        row1.transpose(),
        row2.transpose(),
        row3.transpose(),
    ]))
}

pub fn det_m_cylinder<T: Real>(c: &CanonicalSampleFull<T>) -> Result<T> {
    Ok(det3(&m_cylinder_matrix(c)?))
}

/// `-16 sigma^2 z t cos(beta)`.
pub fn det_m_cylinder_closed<T: Real>(sigma: T, z: T, t: T, beta: T) -> T {
    -T::lit(16.0) * sigma * sigma * z * t * beta.cos()
}

/// Determinants of the true Jacobians `D_x(d_t Phi_1, d_alpha Phi_1, s)` and
/// `D_x(d_t Phi_1, d_beta Phi_1, s)` on the cylinder. In local cylinder
/// coordinates they equal `8 sigma^2 z'^2 sin(beta) sin(theta)` and
/// `8 sigma^2 z'^2 cos(theta)`, so at least one is nonzero whenever
/// `z' != 0`.
pub fn true_cylinder_minors<T: Real>(c: &CanonicalSampleFull<T>) -> Result<(T, T)> {
    check_on_cylinder(c)?;
    let [dt, da, db, s] = projection_x_gradients(SurfaceKind::Apple, c)?;
    let m_alpha = Mat3::from_rows(&[dt.transpose(), da.transpose(), s.transpose()]);
    let m_beta = Mat3::from_rows(&[dt.transpose(), db.transpose(), s.transpose()]);
    Ok((det3(&m_alpha), det3(&m_beta)))
}

/// `|grad_x Psi_j| = 2 |(I + (-1)^j (t/g) A) x_T|` at `x` for the torus
/// `params`.
pub fn amplitude_full<T: Real>(params: &crate::geometry::TorusParams<T>, x: &Vec3<T>) -> Result<T> {
    let g = crate::geometry::grad_psi(params, x)?;
    Ok(g.dot(&g).sqrt())
}

/// Returns `(det(I_m + A B), det(I_n + B A))` for `A` m x n and `B` n x m.
pub fn sylvester_check(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DMatrix<f64>,
) -> Result<(f64, f64)> {
    let (m, n) = a.shape();
    if b.shape() != (n, m) {
        return Err(Error::Dimension(format!(
            "expected B to be {n}x{m}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if m > 6 || n > 6 {
        return Err(Error::Dimension(format!(
            "sylvester check limited to 6x6, got {m}x{n}"
        )));
    }
    let left = (nalgebra::DMatrix::identity(m, m) + a * b).determinant();
    let right = (nalgebra::DMatrix::identity(n, n) + b * a).determinant();
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn sample(x: Vec3<f64>) -> CanonicalSampleFull<f64> {
        CanonicalSampleFull {
            sigma: 1.0,
            t: 1.0,
            x0: Vec3::zeros(),
            alpha: 0.0,
            beta: 0.0,
            x,
        }
    }

    #[test]
    fn apple_dt_example() {
        let d =
            phase_derivatives_full(SurfaceKind::Apple, &sample(Vec3::new(3.0, 0.0, 0.5))).unwrap();
        assert_eq!(d.d_t, -4.0);
        assert_eq!(d.grad_x + d.grad_x0, Vec3::zeros());
    }

    #[test]
    fn sigma_homogeneity() {
        let mut c = CanonicalSampleFull {
            sigma: 0.7f64,
            t: 0.8,
            x0: Vec3::new(0.1, -0.3, 0.2),
            alpha: 1.1,
            beta: 0.6,
            x: Vec3::new(0.4, 0.2, -0.5),
        };
        for kind in [SurfaceKind::Apple, SurfaceKind::Lemon] {
            let a = left_projection_full(kind, &c).unwrap();
            c.sigma *= -2.5;
            let b = left_projection_full(kind, &c).unwrap();
            c.sigma /= -2.5;
            for i in 0..14 {
                let derivative = matches!(i, 0 | 7 | 8 | 9 | 10 | 11 | 12);
                if derivative {
                    assert!((b[i] + 2.5 * a[i]).abs() <= 1e-14 * a[i].abs().max(1.0));
                } else {
                    assert_eq!(a[i], b[i]);
                }
            }
        }
    }

    #[test]
    fn gradx0_block_examples() {
        let c = CanonicalSampleFull {
            sigma: 0.5,
            ..sample(Vec3::new(2.0, 0.0, 0.3))
        };
        assert_eq!(det_gradx0_block(SurfaceKind::Apple, &c).unwrap(), -0.5);
        assert!((det3(&gradx0_jacobian(SurfaceKind::Apple, &c).unwrap()) + 0.5).abs() < 1e-14);
        let on_cyl = sample(Vec3::new(0.0, 1.0, 0.7));
        assert_eq!(det_gradx0_block(SurfaceKind::Apple, &on_cyl).unwrap(), 0.0);
        let lemon = det_gradx0_block(
            SurfaceKind::Lemon,
            &CanonicalSampleFull {
                sigma: -0.3,
                ..on_cyl
            },
        )
        .unwrap();
        assert!(lemon > 0.0);
    }

    #[test]
    fn cylinder_gradient_is_axial() {
        let cyl = CylinderPoint {
            theta: 0.8,
            z: 0.6,
            t: 0.9,
        };
        let c = cyl.sample(1.3, Vec3::new(0.1, 0.2, -0.1), 0.4, 0.9);
        let d = phase_derivatives_full(SurfaceKind::Apple, &c).unwrap();
        let expect = c.frame().r3 * (-2.0 * c.sigma * cyl.z);
        assert!((d.grad_x0 - expect).norm() < 1e-13);
    }

    #[test]
    fn cylinder_angle_derivatives() {
        let cyl = CylinderPoint {
            theta: 1.2f64,
            z: -0.4,
            t: 0.7,
        };
        let (sigma, beta) = (0.9f64, 0.5f64);
        let c = cyl.sample(sigma, Vec3::zeros(), 2.0, beta);
        let d = phase_derivatives_full(SurfaceKind::Apple, &c).unwrap();
        let k = 2.0 * sigma * cyl.t * cyl.z;
        assert!((d.d_alpha - k * cyl.theta.cos() * beta.sin()).abs() < 1e-13);
        assert!((d.d_beta + k * cyl.theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn reference_cylinder_matrix_examples() {
        let cyl = CylinderPoint {
            theta: 0.0,
            z: 1.0,
            t: 1.0,
        };
        let c = cyl.sample(1.0, Vec3::zeros(), 0.3, FRAC_PI_4);
        let det = det_m_cylinder(&c).unwrap();
        assert!((det + 16.0 / 2f64.sqrt()).abs() < 1e-12);

        let flat = CylinderPoint { z: 0.0, ..cyl }.sample(1.0, Vec3::zeros(), 0.3, FRAC_PI_4);
        assert!(det_m_cylinder(&flat).unwrap().abs() < 1e-14);

        let side = CylinderPoint {
            theta: FRAC_PI_2,
            ..cyl
        }
        .sample(1.0, Vec3::zeros(), 0.3, FRAC_PI_4);
        assert!(cylinder_alpha_scalar(&side).unwrap().abs() < 1e-15);

        let off = sample(Vec3::new(2.0, 0.0, 1.0));
        assert!(matches!(det_m_cylinder(&off), Err(Error::InvalidSample(_))));
    }

    #[test]
    fn true_minors_closed_forms() {
        for &(theta, z, beta) in &[(0.3f64, 0.8f64, 0.4f64), (2.0, -1.1, 1.2), (4.0, 0.5, 0.1)] {
            let cyl = CylinderPoint { theta, z, t: 0.6 };
            let sigma = 1.4;
            let c = cyl.sample(sigma, Vec3::new(0.2, 0.0, 0.1), 0.7, beta);
            let (ma, mb) = true_cylinder_minors(&c).unwrap();
            let k = 8.0 * sigma * sigma * z * z;
            assert!((ma - k * beta.sin() * theta.sin()).abs() < 1e-12 * k);
            assert!((mb - k * theta.cos()).abs() < 1e-12 * k);
        }
    }

    #[test]
    fn gradient_operator_determinant() {
        let f = crate::geometry::rotation_matrix(0.3, 0.7);
        for kind in [SurfaceKind::Apple, SurfaceKind::Lemon] {
            let m = gradient_operator(kind, 0.35, &f);
            assert!((det3(&m) - det_gradient_operator_closed(kind, 0.35f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn sylvester_examples() {
        use nalgebra::DMatrix;
        let zero = DMatrix::zeros(3, 2);
        let b = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64);
        assert_eq!(sylvester_check(&zero, &b).unwrap(), (1.0, 1.0));
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -0.5]);
        let v = DMatrix::from_row_slice(1, 3, &[0.3, -1.0, 2.0]);
        let (l, r) = sylvester_check(&u, &v).unwrap();
        let lemma = 1.0 + (&v * &u)[(0, 0)];
        assert!((l - lemma).abs() < 1e-14 && (r - lemma).abs() < 1e-14);
        assert!(sylvester_check(&u, &u).is_err());
        let big = DMatrix::zeros(7, 1);
        assert!(sylvester_check(&big, &DMatrix::zeros(1, 7)).is_err());
    }

    #[test]
    fn amplitude_matches_grad_norm() {
        let tp = crate::geometry::TorusParams::new(
            3.0,
            0.8,
            Vec3::new(0.1, 0.0, 0.2),
            0.5,
            PI / 5.0,
            SurfaceKind::Lemon,
        )
        .unwrap();
        let x = Vec3::new(0.5, 0.3, -0.2);
        let c = CanonicalSampleFull {
            sigma: 1.0,
            t: tp.t,
            x0: tp.x0,
            alpha: tp.alpha,
            beta: tp.beta,
            x,
        };
        let d = phase_derivatives_full(SurfaceKind::Lemon, &c).unwrap();
        assert!((amplitude_full(&tp, &x).unwrap() - d.grad_x.norm()).abs() < 1e-14);
    }
}
