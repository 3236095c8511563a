//! Seeded identity suites comparing every closed form against an
//! independent oracle (brute-force determinants, central differences,
//! analytic areas).
//!
//! Each `measure_*` function draws `n` samples and returns the largest
//! relative error. Sample `i` uses ChaCha stream `i` of the seed, so results
//! do not depend on the worker count. Relative errors are taken against the
//! closed form, and samples are kept a fixed margin away from the zero set of
//! the quantity being checked (for example `|1 - t/g| >= 0.05` for the apple
//! determinants), where a relative error would be meaningless.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    grad_psi, parametrize_surface, psi, psi_expanded, rotation_matrix, singular_points,
    QuadratureSpec, SurfaceKind, TorusParams,
};
use crate::io::Report;
use crate::microlocal::{
    amplitude_full, amplitude_restricted, det_gradient_operator_closed, det_gradx0_block, det_m3,
    det_m3_closed, det_m_cylinder, det_m_cylinder_closed, det_restricted_jacobian,
    gradient_operator, gradx0_jacobian, phase_derivatives_full, restricted_m2,
    restricted_phase_gradient, restricted_projection, restricted_scalars, sylvester_check,
    true_cylinder_minors, CanonicalSampleFull, CanonicalSampleRestricted, CylinderPoint,
};
use crate::oracle::{self, fd_gradient, fd_jacobian};
use crate::scalar::{det3, Vec3};

/// Largest relative error over a batch of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub samples: usize,
    pub max_error: f64,
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `f` on `n` independent streams and keeps the worst error; NaN counts
/// as infinitely bad.
fn measure(n: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> Measurement {
    let max_error = (0..n)
        .into_par_iter()
        .map(|i| {
            let e = f(&mut rng_for(seed, i));
            if e.is_nan() {
                f64::INFINITY
            } else {
                e
            }
        })
        .reduce(|| 0.0, f64::max);
    Measurement {
        samples: n,
        max_error,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    oracle::rel_err(a, b, b)
}

/// `max |a - b| / max |b|` over components.
fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale.max(f64::MIN_POSITIVE)
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

fn angles(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::FRAC_PI_2),
    )
}

fn point3(rng: &mut ChaCha8Rng, half: f64) -> Vec3<f64> {
    Vec3::new(
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
    )
}

/// Full-family sample with local planar radius `g` in `[0.2, 2]` and
/// `|1 + sign t/g| >= margin` for the given kind.
fn full_sample(rng: &mut ChaCha8Rng, kind: SurfaceKind, margin: f64) -> CanonicalSampleFull<f64> {
    loop {
        let t = rng.gen_range(0.2..1.5);
        let g = rng.gen_range(0.2..2.0);
        if (1.0 + kind.sign::<f64>() * t / g).abs() < margin {
            continue;
        }
        let (alpha, beta) = angles(rng);
        let x0 = point3(rng, 1.0);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let local = Vec3::new(g * th.cos(), g * th.sin(), rng.gen_range(-2.0..2.0));
        let frame = rotation_matrix(alpha, beta);
        return CanonicalSampleFull {
            sigma: signed(rng, 0.5, 2.0),
            t,
            x0,
            alpha,
            beta,
            x: x0 + frame.to_world(&local),
        };
    }
}

/// Restricted sample with `|u| >= 0.1`, `|u - 2| >= 0.2` and `|z| >= 0.1`.
fn restricted_sample(rng: &mut ChaCha8Rng) -> CanonicalSampleRestricted<f64> {
    loop {
        let x0 = rng.gen_range(-1.0..1.0);
        let y0 = rng.gen_range(-1.0..1.0);
        let rho = rng.gen_range(0.2..2.0);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = signed(rng, 0.1, 3.0);
        let c = CanonicalSampleRestricted {
            sigma: signed(rng, 0.5, 2.0),
            x0,
            y0,
            x: Vec3::new(x0 + rho * th.cos(), y0 + rho * th.sin(), z),
        };
        let r = restricted_scalars(&c).expect("rho > 0");
        if r.u.abs() >= 0.1 && r.u2.abs() >= 0.2 {
            return c;
        }
    }
}

fn cylinder_sample(rng: &mut ChaCha8Rng) -> CanonicalSampleFull<f64> {
    let cyl = CylinderPoint {
        theta: rng.gen_range(0.0..std::f64::consts::TAU),
        z: signed(rng, 0.2, 2.0),
        t: rng.gen_range(0.3..1.5),
    };
    let (alpha, beta) = angles(rng);
    cyl.sample(signed(rng, 0.5, 2.0), point3(rng, 1.0), alpha, beta)
}

fn local_z(c: &CanonicalSampleFull<f64>) -> f64 {
    c.frame().to_local(&(c.x - c.x0)).z
}

// ---------------------------------------------------------------- geometry

/// `det(I + sign (t/g) A)` by brute-force 3x3 expansion against
/// `(1 + sign t/g)^2`.
pub fn measure_gradient_operator_det(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let (alpha, beta) = angles(rng);
        let ratio = loop {
            let r = rng.gen_range(0.0..4.0);
            if (1.0 + kind.sign::<f64>() * r).abs() >= 0.05 {
                break r;
            }
        };
        let m = gradient_operator(kind, ratio, &rotation_matrix(alpha, beta));
        // cofactor expansion, independent of the LU used elsewhere
        let brute = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
        rel(brute, det_gradient_operator_closed(kind, ratio))
    })
}

/// `det(I_m + AB) = det(I_n + BA)` on random rectangular pairs with
/// `m, n <= 6`. Pairs whose determinant is below 1% of the Hadamard bound
/// are redrawn.
pub fn measure_sylvester(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| loop {
        let m = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=6);
        let a = DMatrix::from_fn(m, k, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(k, m, |_, _| rng.gen_range(-1.0..1.0));
        let ipab = DMatrix::identity(m, m) + &a * &b;
        let hadamard: f64 = ipab.row_iter().map(|r| r.norm()).product();
        let (l, r) = sylvester_check(&a, &b).expect("shapes match");
        if l.abs() < 1e-2 * hadamard {
            continue;
        }
        return rel(l, r);
    })
}

/// Orthogonality of `R`, `det R = 1`, and `A` symmetric, idempotent with
/// `A r3 = 0`; absolute errors.
pub fn measure_frame_invariants(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let (alpha, beta) = angles(rng);
        let f = rotation_matrix(alpha, beta);
        let r = f.rotation;
        let a = f.projector;
        [
            (r.transpose() * r - nalgebra::Matrix3::identity()).amax(),
            (r.determinant() - 1.0).abs(),
            (a * a - a).amax(),
            (a - a.transpose()).amax(),
            (a * f.r3).amax(),
            (oracle::rotation(alpha, beta).matrix() - r).amax(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    })
}

fn torus_from(
    c: &CanonicalSampleFull<f64>,
    kind: SurfaceKind,
    rng: &mut ChaCha8Rng,
) -> TorusParams<f64> {
    let s = c.t * c.t + rng.gen_range(0.1..3.0);
    TorusParams::new(s, c.t, c.x0, c.alpha, c.beta, kind).expect("valid by construction")
}

/// `psi`, its expanded form and the from-scratch oracle agree; errors are
/// relative to `s + |x_T|^2`, the size of the terms that cancel.
pub fn measure_psi_forms(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = full_sample(rng, kind, 0.0);
        let p = torus_from(&c, kind, rng);
        let a = psi(&p, &c.x).expect("g > 0");
        let b = psi_expanded(&p, &c.x);
        let o = oracle::phase_full(
            kind,
            1.0,
            p.s,
            p.t,
            p.alpha,
            p.beta,
            p.x0.into(),
            c.x.into(),
        );
        let scale = p.s + (c.x - p.x0).norm_squared();
        ((a - b).abs().max((a - o).abs())) / scale
    })
}

/// `grad_x Psi` against central differences of the oracle phase.
pub fn measure_grad_psi(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = full_sample(rng, kind, 0.0);
        let p = torus_from(&c, kind, rng);
        let g = grad_psi(&p, &c.x).expect("g > 0");
        let fd = fd_gradient(
            |x| {
                oracle::phase_full(
                    kind,
                    1.0,
                    p.s,
                    p.t,
                    p.alpha,
                    p.beta,
                    p.x0.into(),
                    [x[0], x[1], x[2]],
                )
            },
            c.x.as_slice(),
        );
        rel_vec(g.as_slice(), &fd)
    })
}

/// Quadrature nodes satisfy `|Psi| / s` small, and both singular points lie
/// on the surface.
pub fn measure_surface_nodes(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = full_sample(rng, kind, 0.0);
        let p = torus_from(&c, kind, rng);
        let q = parametrize_surface(&p, QuadratureSpec::new(9, 8).unwrap(), &|_: &Vec3<f64>| {
            true
        })
        .expect("valid params");
        let (a, b) = singular_points(&p).expect("valid params");
        q.points
            .iter()
            .map(|pt| psi_expanded(&p, &pt.x).abs())
            .chain([psi_expanded(&p, &a).abs(), psi_expanded(&p, &b).abs()])
            .fold(0.0, f64::max)
            / p.s
    })
}

/// Relative error of the quadrature area at `nodes x nodes` for `s = 4,
/// t = 1`.
pub fn quadrature_area_error(kind: SurfaceKind, nodes: usize) -> f64 {
    let p = TorusParams::axis_aligned(4.0, 1.0, Vec3::zeros(), kind).unwrap();
    let q = parametrize_surface(
        &p,
        QuadratureSpec::new(nodes, nodes).unwrap(),
        &|_: &Vec3<f64>| true,
    )
    .unwrap();
    rel(q.total_weight(), oracle::surface_area(kind, 4.0, 1.0))
}

/// Observed order `log2(e(n/2) / e(n))`.
pub fn quadrature_order(kind: SurfaceKind, nodes: usize) -> f64 {
    (quadrature_area_error(kind, nodes / 2) / quadrature_area_error(kind, nodes)).log2()
}

/// Smooth test function for the measure-convention check.
pub fn smooth_test_function(x: &[f64; 3]) -> f64 {
    (0.3 * x[0] - 0.2 * x[1] + 0.1 * x[2]).cos()
        * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 20.0).exp()
}

/// Relative gap between the surface quadrature of [`smooth_test_function`]
/// and the smoothed-delta volume integral, for a tilted, shifted torus.
pub fn measure_convention_gap(kind: SurfaceKind) -> f64 {
    let (s, t, alpha, beta, x0) = (4.0, 1.0, 0.4, 0.3, [0.1, -0.2, 0.05]);
    let p = TorusParams::new(s, t, Vec3::from(x0), alpha, beta, kind).unwrap();
    let q = parametrize_surface(&p, QuadratureSpec::new(256, 256).unwrap(), &|_: &Vec3<
        f64,
    >| true)
    .unwrap();
    let surface = q.integrate(|x| smooth_test_function(&[x.x, x.y, x.z]));
    let volume = oracle::smoothed_delta_integral(
        kind,
        s,
        t,
        alpha,
        beta,
        x0,
        smooth_test_function,
        1e-2,
        2e-3,
        64,
    );
    rel(volume, surface)
}

// --------------------------------------------------------------- microlocal

/// Every closed-form first derivative of `sigma Psi_j` against central
/// differences of the oracle phase in `(s, t, alpha, beta, x0, x)`.
pub fn measure_full_phase_derivatives(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = full_sample(rng, kind, 0.0);
        let s = c.t * c.t + rng.gen_range(0.1..3.0);
        let d = phase_derivatives_full(kind, &c).expect("g > 0");
        let closed = [
            d.d_s,
            d.d_t,
            d.d_alpha,
            d.d_beta,
            d.grad_x0.x,
            d.grad_x0.y,
            d.grad_x0.z,
            d.grad_x.x,
            d.grad_x.y,
            d.grad_x.z,
        ];
        let vars = [
            s, c.t, c.alpha, c.beta, c.x0.x, c.x0.y, c.x0.z, c.x.x, c.x.y, c.x.z,
        ];
        let fd = fd_gradient(
            |v| {
                oracle::phase_full(
                    kind,
                    c.sigma,
                    v[0],
                    v[1],
                    v[2],
                    v[3],
                    [v[4], v[5], v[6]],
                    [v[7], v[8], v[9]],
                )
            },
            &vars,
        );
        rel_vec(&closed, &fd)
    })
}

/// Restricted phase: `d_p`, `d_x0`, `d_y0` (from the left projection) and
/// `grad_x` against central differences.
pub fn measure_restricted_phase_derivatives(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = restricted_sample(rng);
        let p = rng.gen_range(0.1..8.0);
        let proj = restricted_projection(&c).expect("g > 0");
        let g = restricted_phase_gradient(&c).expect("g > 0");
        let closed = [c.sigma, proj[4], proj[5], g.x, g.y, g.z];
        let vars = [p, c.x0, c.y0, c.x.x, c.x.y, c.x.z];
        let fd = fd_gradient(
            |v| oracle::phase_restricted(c.sigma, v[0], v[1], v[2], [v[3], v[4], v[5]]),
            &vars,
        );
        rel_vec(&closed, &fd)
    })
}

/// `det D_x(grad_x0 Phi_j) = -(2 sigma)^3 (1 + sign t/g)` against the
/// determinant of a finite-difference Jacobian, and against the analytic
/// Jacobian.
pub fn measure_gradx0_det(kind: SurfaceKind, n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = full_sample(rng, kind, 0.05);
        let closed = det_gradx0_block(kind, &c).expect("g > 0");
        let jac = fd_jacobian(
            |x| {
                let mut cx = c;
                cx.x = Vec3::new(x[0], x[1], x[2]);
                let d = phase_derivatives_full(kind, &cx).expect("g > 0");
                vec![d.grad_x0.x, d.grad_x0.y, d.grad_x0.z]
            },
            c.x.as_slice(),
        );
        let analytic = det3(&gradx0_jacobian(kind, &c).expect("g > 0"));
        rel(jac.determinant(), closed).max(rel(analytic, closed))
    })
}

/// The reference matrix on `{g = t}` assembled analytically against
/// `-16 sigma^2 z' t cos(beta)`; relative to `16 sigma^2 |z'| t` since
/// `cos(beta)` may vanish.
pub fn measure_det_m_analytic(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = cylinder_sample(rng);
        let z = local_z(&c);
        let closed = det_m_cylinder_closed(c.sigma, z, c.t, c.beta);
        let scale = 16.0 * c.sigma * c.sigma * z.abs() * c.t;
        oracle::rel_err(det_m_cylinder(&c).expect("on cylinder"), closed, scale)
    })
}

fn fd_rows(
    c: &CanonicalSampleFull<f64>,
    pick: impl Fn(&crate::microlocal::PhaseDerivatives<f64>, f64) -> Vec<f64>,
) -> DMatrix<f64> {
    fd_jacobian(
        |x| {
            let mut cx = *c;
            cx.x = Vec3::new(x[0], x[1], x[2]);
            let d = phase_derivatives_full(SurfaceKind::Apple, &cx).expect("g > 0");
            pick(&d, cx.s(SurfaceKind::Apple).expect("g > 0"))
        },
        c.x.as_slice(),
    )
}

/// `-16 sigma^2 z' t cos(beta)` against the determinant of the
/// finite-difference Jacobian of `(d_t Phi_1, d_alpha Phi_1, s)` on the
/// cylinder, with the same scale as [`measure_det_m_analytic`]. The
/// reference closed form is not this determinant, so this check fails.
pub fn measure_det_m_fd(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = cylinder_sample(rng);
        let z = local_z(&c);
        let closed = det_m_cylinder_closed(c.sigma, z, c.t, c.beta);
        let jac = fd_rows(&c, |d, s| vec![d.d_t, d.d_alpha, s]);
        oracle::rel_err(
            jac.determinant(),
            closed,
            16.0 * c.sigma * c.sigma * z.abs() * c.t,
        )
    })
}

/// The actual cylinder minors against finite differences, relative to
/// `8 sigma^2 z'^2`.
pub fn measure_cylinder_minors(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = cylinder_sample(rng);
        let z = local_z(&c);
        let (ma, mb) = true_cylinder_minors(&c).expect("on cylinder");
        let fa = fd_rows(&c, |d, s| vec![d.d_t, d.d_alpha, s]).determinant();
        let fb = fd_rows(&c, |d, s| vec![d.d_t, d.d_beta, s]).determinant();
        let scale = 8.0 * c.sigma * c.sigma * z * z;
        oracle::rel_err(ma, fa, scale).max(oracle::rel_err(mb, fb, scale))
    })
}

/// `det D Pi_L = -16 z sigma^2 u^4 (u - 2)` against the determinant of the
/// 6x6 finite-difference Jacobian in `(sigma, x0, y0, x)`.
pub fn measure_restricted_det(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = restricted_sample(rng);
        let closed = det_restricted_jacobian(&c).expect("g > 0");
        let jac = fd_jacobian(
            |v| {
                let cv = CanonicalSampleRestricted {
                    sigma: v[0],
                    x0: v[1],
                    y0: v[2],
                    x: Vec3::new(v[3], v[4], v[5]),
                };
                restricted_projection(&cv).expect("g > 0").to_vec()
            },
            &[c.sigma, c.x0, c.y0, c.x.x, c.x.y, c.x.z],
        );
        rel(jac.determinant(), closed)
    })
}

/// Analytic `M2` against the finite-difference Jacobian of
/// `(p, d_x0 Phi, d_y0 Phi)` in `x`.
pub fn measure_restricted_m2(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = restricted_sample(rng);
        let m2 = restricted_m2(&c).expect("g > 0");
        let jac = fd_jacobian(
            |x| {
                let mut cx = c;
                cx.x = Vec3::new(x[0], x[1], x[2]);
                restricted_projection(&cx).expect("g > 0")[3..].to_vec()
            },
            c.x.as_slice(),
        );
        let a: Vec<f64> = m2.transpose().iter().copied().collect();
        let b: Vec<f64> = jac.transpose().iter().copied().collect();
        rel_vec(&a, &b)
    })
}

/// `det M3 = -h^2 u (u - 2)`.
pub fn measure_det_m3(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let c = restricted_sample(rng);
        rel(
            det_m3(&c).expect("g > 0"),
            det_m3_closed(&c).expect("g > 0"),
        )
    })
}

/// Amplitudes against finite-difference gradient norms.
pub fn measure_amplitudes(n: usize, seed: u64) -> Measurement {
    measure(n, seed, |rng| {
        let kind = if rng.gen_bool(0.5) {
            SurfaceKind::Apple
        } else {
            SurfaceKind::Lemon
        };
        let c = full_sample(rng, kind, 0.0);
        let p = torus_from(&c, kind, rng);
        let a = amplitude_full(&p, &c.x).expect("g > 0");
        let fd = fd_gradient(
            |x| {
                oracle::phase_full(
                    kind,
                    1.0,
                    p.s,
                    p.t,
                    p.alpha,
                    p.beta,
                    p.x0.into(),
                    [x[0], x[1], x[2]],
                )
            },
            c.x.as_slice(),
        );
        let fd_norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = restricted_sample(rng);
        r.sigma = 1.0;
        let pr = rng.gen_range(0.1..8.0);
        let ar = amplitude_restricted(&r).expect("g > 0");
        let fr = fd_gradient(
            |x| oracle::phase_restricted(1.0, pr, r.x0, r.y0, [x[0], x[1], x[2]]),
            r.x.as_slice(),
        );
        let fr_norm = fr.iter().map(|v| v * v).sum::<f64>().sqrt();
        rel(a, fd_norm).max(rel(ar, fr_norm))
    })
}

// ------------------------------------------------------------------- suites

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Geometry,
    Microlocal,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Suite::All),
            "geometry" => Ok(Suite::Geometry),
            "microlocal" => Ok(Suite::Microlocal),
            other => Err(Error::Parse(format!("unknown suite `{other}`"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::Geometry => "geometry",
            Suite::Microlocal => "microlocal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported but not counted as a failure: the reference closed form is
    /// known to disagree with the oracle.
    KnownDefect,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::KnownDefect => "known-defect",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measurement: Measurement,
    pub tolerance: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn n_failed(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count()
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("suite", self.suite)
            .push("samples", self.samples)
            .push("seed", self.seed)
            .push("checks", self.checks.len())
            .push("failed", self.n_failed());
        for c in &self.checks {
            r.push(
                format!("check.{}", c.name),
                format!(
                    "{} max_rel_err={:e} tol={:e} n={}",
                    c.status, c.measurement.max_error, c.tolerance, c.measurement.samples
                ),
            );
        }
        r.push("result", if self.passed() { "pass" } else { "fail" });
        r
    }

    pub fn to_text(&self) -> String {
        self.to_report().to_text()
    }
}

fn check(name: &'static str, m: Measurement, tolerance: f64) -> Check {
    Check {
        name,
        measurement: m,
        tolerance,
        status: if m.max_error <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
    }
}

fn geometry_checks(n: usize, seed: u64) -> Vec<Check> {
    use SurfaceKind::{Apple, Lemon};
    vec![
        check(
            "det_i_minus_tg_a",
            measure_gradient_operator_det(Apple, n, seed),
            1e-10,
        ),
        check(
            "det_i_plus_tg_a",
            measure_gradient_operator_det(Lemon, n, seed),
            1e-10,
        ),
        check("sylvester", measure_sylvester(n, seed), 1e-12),
        check("frame_invariants", measure_frame_invariants(n, seed), 1e-14),
        check("psi_forms_apple", measure_psi_forms(Apple, n, seed), 1e-13),
        check("psi_forms_lemon", measure_psi_forms(Lemon, n, seed), 1e-13),
        check("grad_psi_apple", measure_grad_psi(Apple, n, seed), 1e-6),
        check("grad_psi_lemon", measure_grad_psi(Lemon, n, seed), 1e-6),
        check(
            "surface_nodes_apple",
            measure_surface_nodes(Apple, n.min(2000), seed),
            1e-13,
        ),
        check(
            "surface_nodes_lemon",
            measure_surface_nodes(Lemon, n.min(2000), seed),
            1e-13,
        ),
        check(
            "area_apple_256",
            Measurement {
                samples: 1,
                max_error: quadrature_area_error(Apple, 256),
            },
            1e-3,
        ),
        check(
            "area_lemon_256",
            Measurement {
                samples: 1,
                max_error: quadrature_area_error(Lemon, 256),
            },
            1e-3,
        ),
    ]
}

fn microlocal_checks(n: usize, seed: u64) -> Vec<Check> {
    use SurfaceKind::{Apple, Lemon};
    let mut checks = vec![
        check(
            "phase_derivatives_apple",
            measure_full_phase_derivatives(Apple, n, seed),
            1e-6,
        ),
        check(
            "phase_derivatives_lemon",
            measure_full_phase_derivatives(Lemon, n, seed),
            1e-6,
        ),
        check(
            "phase_derivatives_restricted",
            measure_restricted_phase_derivatives(n, seed),
            1e-6,
        ),
        check("det_gradx0_apple", measure_gradx0_det(Apple, n, seed), 1e-5),
        check("det_gradx0_lemon", measure_gradx0_det(Lemon, n, seed), 1e-5),
        check(
            "det_m_cylinder_analytic",
            measure_det_m_analytic(n, seed),
            1e-10,
        ),
        check("cylinder_minors_fd", measure_cylinder_minors(n, seed), 1e-5),
        check(
            "det_restricted_jacobian",
            measure_restricted_det(n, seed),
            1e-5,
        ),
        check("restricted_m2_fd", measure_restricted_m2(n, seed), 1e-6),
        check("det_m3", measure_det_m3(n, seed), 1e-10),
        check("amplitudes", measure_amplitudes(n, seed), 1e-6),
    ];
    let mut fd = check("det_m_cylinder_fd", measure_det_m_fd(n, seed), 1e-4);
    if fd.status == CheckStatus::Fail {
        fd.status = CheckStatus::KnownDefect;
    }
    checks.push(fd);
    checks
}

/// Runs a suite. The report is a pure function of `(suite, samples, seed)`.
pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> Result<SuiteReport> {
    if samples == 0 {
        return Err(Error::InvalidParams("samples must be positive".into()));
    }
    let checks = match suite {
        Suite::Geometry => geometry_checks(samples, seed),
        Suite::Microlocal => microlocal_checks(samples, seed),
        Suite::All => {
            let mut c = geometry_checks(samples, seed);
            c.extend(microlocal_checks(samples, seed));
            c
        }
    };
    Ok(SuiteReport {
        suite,
        samples,
        seed,
        checks,
    })
}
