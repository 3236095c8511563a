//! Independent reference computations used to check the closed forms:
//! central finite differences, phases rebuilt from nalgebra rotations,
//! analytic surface areas and a smoothed-delta volume integral.

use nalgebra::{DMatrix, Rotation3, Vector3};

use crate::geometry::SurfaceKind;

/// Relative step used by the finite-difference oracles.
pub const FD_REL_STEP: f64 = 1e-6;

/// Step for a variable of magnitude `x`.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    FD_REL_STEP * x.abs().max(1.0)
}

/// Central difference of `f` at `x`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference gradient of a scalar function of `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian; row `r` holds the derivatives of output `r`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> DMatrix<f64> {
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        for r in 0..m {
            jac[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// `|a - b| / scale`, with `scale` floored at the smallest positive normal.
#[inline]
pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

/// `R = Rz(alpha) Rx(beta)` built from nalgebra axis-angle rotations.
pub fn rotation(alpha: f64, beta: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), alpha)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), beta)
}

/// `sigma * ((g + (-1)^j t)^2 + z'^2 - s)` from scratch.
#[allow(clippy::too_many_arguments)]
pub fn phase_full(
    kind: SurfaceKind,
    sigma: f64,
    s: f64,
    t: f64,
    alpha: f64,
    beta: f64,
    x0: [f64; 3],
    x: [f64; 3],
) -> f64 {
    let local =
        rotation(alpha, beta).inverse() * Vector3::new(x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]);
    let g = local.x.hypot(local.y);
    let sign = match kind {
        SurfaceKind::Apple => -1.0,
        SurfaceKind::Lemon => 1.0,
    };
    let r = g + sign * t;
    sigma * (r * r + local.z * local.z - s)
}

/// Restricted phase `sigma * (p - h^2/g)` with planar `g` squared.
pub fn phase_restricted(sigma: f64, p: f64, x0: f64, y0: f64, x: [f64; 3]) -> f64 {
    let dx = x[0] - x0;
    let dy = x[1] - y0;
    let g = dx * dx + dy * dy;
    let h = g + x[2] * x[2] - 1.0;
    sigma * (p - h * h / g)
}

/// Area of the full apple: `4 pi sqrt(s) (t acos(-t/sqrt s) + sqrt(s - t^2))`.
pub fn apple_area(s: f64, t: f64) -> f64 {
    let rs = s.sqrt();
    4.0 * std::f64::consts::PI * rs * (t * (-t / rs).acos() + (s - t * t).sqrt())
}

/// Area of the full lemon: `4 pi sqrt(s) (sqrt(s - t^2) - t acos(t/sqrt s))`.
pub fn lemon_area(s: f64, t: f64) -> f64 {
    let rs = s.sqrt();
    4.0 * std::f64::consts::PI * rs * ((s - t * t).sqrt() - t * (t / rs).acos())
}

pub fn surface_area(kind: SurfaceKind, s: f64, t: f64) -> f64 {
    match kind {
        SurfaceKind::Apple => apple_area(s, t),
        SurfaceKind::Lemon => lemon_area(s, t),
    }
}

/// Smoothed-delta volume integral `int |grad Psi| delta_eps(Psi) f dx` with a
/// Gaussian `delta_eps` of width `eps` (in units of `Psi`).
///
/// Evaluated in cylindrical coordinates about the torus axis: midpoint rule
/// in `(rho, z)` with spacing `h` restricted to the band `|Psi| < 8 eps`,
/// and `n_theta` midpoint nodes in the revolution angle.
#[allow(clippy::too_many_arguments)]
pub fn smoothed_delta_integral(
    kind: SurfaceKind,
    s: f64,
    t: f64,
    alpha: f64,
    beta: f64,
    x0: [f64; 3],
    f: impl Fn(&[f64; 3]) -> f64 + Sync,
    eps: f64,
    h: f64,
    n_theta: usize,
) -> f64 {
    use rayon::prelude::*;

    let sign = match kind {
        SurfaceKind::Apple => -1.0,
        SurfaceKind::Lemon => 1.0,
    };
    let rs = s.sqrt();
    let margin = 10.0 * eps / rs + 4.0 * h;
    let rho_max = (rs - sign * t).max(0.0) + margin;
    let z_max = rs + margin;
    let n_rho = (rho_max / h).ceil() as usize;
    let n_z = (2.0 * z_max / h).ceil() as usize;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * eps);

    // (rho, z, |grad Psi| delta_eps(Psi) rho) for cells in the band
    let band: Vec<(f64, f64, f64)> = (0..n_rho)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rho = (i as f64 + 0.5) * h;
            (0..n_z).filter_map(move |k| {
                let z = -z_max + (k as f64 + 0.5) * h;
                let r = rho + sign * t;
                let psi = r * r + z * z - s;
                if psi.abs() >= 8.0 * eps {
                    return None;
                }
                let grad = 2.0 * (r * r + z * z).sqrt();
                let delta = norm * (-0.5 * (psi / eps).powi(2)).exp();
                Some((rho, z, grad * delta * rho))
            })
        })
        .collect();

    let rot = rotation(alpha, beta);
    let d_theta = 2.0 * std::f64::consts::PI / n_theta as f64;
    let total: f64 = (0..n_theta)
        .into_par_iter()
        .map(|m| {
            let theta = (m as f64 + 0.5) * d_theta;
            let (st, ct) = theta.sin_cos();
            band.iter()
                .map(|&(rho, z, w)| {
                    let p = rot * Vector3::new(rho * ct, rho * st, z);
                    w * f(&[p.x + x0[0], p.y + x0[1], p.z + x0[2]])
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total * h * h * d_theta
}
