//! Sampling checks of the Bolker condition: the left projection must be an
//! immersion (Jacobian of full rank) and injective.
//!
//! For each base parameter the scan evaluates the projection on a lattice of
//! points `x`, hashes the `x`-dependent outputs quantized to `1e-7` of their
//! range and reports every pair of distinct points sharing a bucket. "No
//! collision" is therefore a statement about the sampled lattice only.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::artifacts::Family;
use super::restricted::{restricted_m2, restricted_projection, CanonicalSampleRestricted};
use super::{left_projection_full, CanonicalSampleFull};
use crate::error::{Error, Result};
use crate::oracle::fd_jacobian;
use crate::scalar::{det3, Vec3};

/// Absolute quantization step of projection outputs in the collision search.
pub const COLLISION_QUANTUM: f64 = 1e-7;

/// Where the points `x` are drawn from, relative to each base parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanRegion {
    /// Box `|x - x0|, |y - y0| < half_width`, `zmin < z < zmax`.
    Box {
        half_width: f64,
        zmin: f64,
        zmax: f64,
    },
    /// The sheet `z = sqrt(1 + rho^2)` of the hyperboloid `u = 2`, with
    /// planar radius `rho` in `[rho_min, rho_max]`.
    Hyperboloid { rho_min: f64, rho_max: f64 },
    /// Box points with `u - 2 >= margin`.
    UAbove {
        half_width: f64,
        zmin: f64,
        zmax: f64,
        margin: f64,
    },
    /// Points of the unit ball about `(x0, y0, 0)` with `zmin < z < zmax`,
    /// off the axis and with `u <= -margin`. Keeps the lemon scan inside its
    /// support and away from the sphere `u = 0`, where every output vanishes.
    BallSlab { zmin: f64, zmax: f64, margin: f64 },
    /// Ball of the given radius about the origin (full family).
    Ball { radius: f64 },
}

impl ScanRegion {
    /// Default region on which the family's projection is expected to be an
    /// injective immersion.
    pub fn valid_default(family: Family) -> Self {
        match family {
            Family::RestrictedLemon => ScanRegion::BallSlab {
                zmin: 0.0,
                zmax: 1.0,
                margin: 0.05,
            },
            Family::RestrictedApple => ScanRegion::UAbove {
                half_width: 1.0,
                zmin: 1.0,
                zmax: 3.0,
                margin: 0.1,
            },
            Family::Full7dApple | Family::Full7dLemon => ScanRegion::Ball { radius: 1.0 },
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ScanRegion::Box {
                half_width,
                zmin,
                zmax,
            } => {
                format!("box:w={half_width},z=({zmin},{zmax})")
            }
            ScanRegion::Hyperboloid { rho_min, rho_max } => {
                format!("hyperboloid:rho=[{rho_min},{rho_max}]")
            }
            ScanRegion::UAbove {
                half_width,
                zmin,
                zmax,
                margin,
            } => format!("u-above:w={half_width},z=({zmin},{zmax}),margin={margin}"),
            ScanRegion::BallSlab { zmin, zmax, margin } => {
                format!("ball-slab:z=({zmin},{zmax}),margin={margin}")
            }
            ScanRegion::Ball { radius } => format!("ball:r={radius}"),
        }
    }
}

/// Region syntax for the command line: `box:W,ZMIN,ZMAX`, `hyperboloid:RMIN,RMAX`,
/// `u-above:W,ZMIN,ZMAX,MARGIN`, `ball-slab:ZMIN,ZMAX,MARGIN` and `ball:R`.
impl std::str::FromStr for ScanRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("scan region `{s}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let region = match (name.trim(), nums.as_slice()) {
            ("box", &[half_width, zmin, zmax]) => ScanRegion::Box {
                half_width,
                zmin,
                zmax,
            },
            ("hyperboloid", &[rho_min, rho_max]) => ScanRegion::Hyperboloid { rho_min, rho_max },
            ("u-above", &[half_width, zmin, zmax, margin]) => ScanRegion::UAbove {
                half_width,
                zmin,
                zmax,
                margin,
            },
            ("ball-slab", &[zmin, zmax, margin]) => ScanRegion::BallSlab { zmin, zmax, margin },
            ("ball", &[radius]) => ScanRegion::Ball { radius },
            _ => return Err(Error::Parse(format!("unknown scan region `{s}`"))),
        };
        Ok(region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub family: Family,
    pub region: ScanRegion,
    /// Total number of lattice points over all bases (approximate).
    pub n_samples: usize,
    pub n_bases: usize,
    pub seed: u64,
}

impl ScanConfig {
    pub fn new(family: Family, region: ScanRegion, n_samples: usize) -> Self {
        Self {
            family,
            region,
            n_samples,
            n_bases: 4,
            seed: 0,
        }
    }
}

/// Two distinct points with the same quantized projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub base: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Collision {
    /// Same `(x, y)` and opposite `z`.
    pub fn is_z_reflection(&self) -> bool {
        let tol = 1e-12;
        (self.a[0] - self.b[0]).abs() <= tol
            && (self.a[1] - self.b[1]).abs() <= tol
            && (self.a[2] + self.b[2]).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BolkerReport {
    pub family: Family,
    pub region: String,
    pub n_samples: usize,
    pub n_bases: usize,
    /// Smallest immersion measure over all samples: `|det M2|` divided by
    /// the product of its row norms (restricted families), or the ratio of
    /// smallest to largest singular value of the 14x10 finite-difference
    /// Jacobian (full families). Both lie in `[0, 1]`.
    pub min_immersion: f64,
    pub max_immersion: f64,
    pub collisions: Vec<Collision>,
    /// Samples that could not be evaluated, with the reason.
    pub failures: Vec<(usize, String)>,
}

impl BolkerReport {
    pub fn n_collisions(&self) -> usize {
        self.collisions.len()
    }

    pub fn n_reflection_pairs(&self) -> usize {
        self.collisions
            .iter()
            .filter(|c| c.is_z_reflection())
            .count()
    }

    /// Key/value summary, one item per line.
    pub fn to_text(&self) -> String {
        format!(
            "family={}\nregion={}\nsamples={}\nbases={}\nmin_immersion={:e}\nmax_immersion={:e}\ncollisions={}\nreflection_pairs={}\nfailures={}\n",
            self.family,
            self.region,
            self.n_samples,
            self.n_bases,
            self.min_immersion,
            self.max_immersion,
            self.n_collisions(),
            self.n_reflection_pairs(),
            self.failures.len()
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum Base {
    Restricted {
        sigma: f64,
        x0: f64,
        y0: f64,
    },
    Full {
        sigma: f64,
        t: f64,
        x0: Vec3<f64>,
        alpha: f64,
        beta: f64,
    },
}

fn draw_bases(family: Family, n: usize, seed: u64) -> Vec<Base> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n.max(1))
        .map(|_| {
            let magnitude = rng.gen_range(0.5..2.0);
            let sigma = if rng.gen_bool(0.5) {
                magnitude
            } else {
                -magnitude
            };
            if family.is_restricted() {
                Base::Restricted {
                    sigma,
                    x0: rng.gen_range(-0.5..0.5),
                    y0: rng.gen_range(-0.5..0.5),
                }
            } else {
                Base::Full {
                    sigma,
                    t: rng.gen_range(0.3..1.2),
                    x0: Vec3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                    ),
                    alpha: rng.gen_range(0.0..2.0 * PI),
                    beta: rng.gen_range(0.1..FRAC_PI_2 - 0.1),
                }
            }
        })
        .collect()
}

/// Cell-centred lattice on `[lo, hi]`; mirrored exactly when `lo = -hi`.
fn axis_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    let mut v: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * step).collect();
    if lo == -hi {
        for k in n / 2..n {
            v[k] = -v[n - 1 - k];
        }
    }
    v
}

fn lattice_points(region: &ScanRegion, n: usize, center: (f64, f64)) -> Vec<[f64; 3]> {
    let side = ((n as f64).cbrt().round() as usize).max(2);
    match *region {
        ScanRegion::Box {
            half_width,
            zmin,
            zmax,
        } => {
            let xs = axis_nodes(-half_width, half_width, side);
            let zs = axis_nodes(zmin, zmax, side);
            let mut out = Vec::with_capacity(side * side * side);
            for &z in &zs {
                for &dy in &xs {
                    for &dx in &xs {
                        out.push([center.0 + dx, center.1 + dy, z]);
                    }
                }
            }
            out
        }
        ScanRegion::UAbove {
            half_width,
            zmin,
            zmax,
            margin,
        } => {
            // oversample the box so roughly n points survive the filter
            let mut points = Vec::new();
            let mut m = n;
            for _ in 0..6 {
                points = lattice_points(
                    &ScanRegion::Box {
                        half_width,
                        zmin,
                        zmax,
                    },
                    m,
                    center,
                )
                .into_iter()
                .filter(|p| {
                    let dx = p[0] - center.0;
                    let dy = p[1] - center.1;
                    let g = dx * dx + dy * dy;
                    let h = g + p[2] * p[2] - 1.0;
                    h / g - 2.0 >= margin
                })
                .collect();
                if points.len() >= n {
                    break;
                }
                m *= 2;
            }
            points
        }
        ScanRegion::BallSlab { zmin, zmax, margin } => {
            let mut points = Vec::new();
            let mut m = n;
            for _ in 0..6 {
                points = lattice_points(
                    &ScanRegion::Box {
                        half_width: 1.0,
                        zmin,
                        zmax,
                    },
                    m,
                    center,
                )
                .into_iter()
                .filter(|p| {
                    let dx = p[0] - center.0;
                    let dy = p[1] - center.1;
                    let g = dx * dx + dy * dy;
                    g > 0.0 && (g + p[2] * p[2] - 1.0) / g <= -margin
                })
                .collect();
                if points.len() >= n {
                    break;
                }
                m *= 2;
            }
            points
        }
        ScanRegion::Hyperboloid { rho_min, rho_max } => {
            let n_rho = ((n as f64).sqrt().round() as usize).max(2);
            let n_phi = (n / n_rho).max(2);
            let rhos = axis_nodes(rho_min, rho_max, n_rho);
            let mut out = Vec::with_capacity(n_rho * n_phi);
            for &rho in &rhos {
                let z = (1.0 + rho * rho).sqrt();
                for k in 0..n_phi {
                    let phi = 2.0 * PI * (k as f64 + 0.25) / n_phi as f64;
                    out.push([center.0 + rho * phi.cos(), center.1 + rho * phi.sin(), z]);
                }
            }
            out
        }
        ScanRegion::Ball { radius } => {
            let mut out = Vec::new();
            let mut side = side;
            for _ in 0..6 {
                let xs = axis_nodes(-radius, radius, side);
                out.clear();
                for &z in &xs {
                    for &y in &xs {
                        for &x in &xs {
                            if x * x + y * y + z * z < radius * radius {
                                out.push([x, y, z]);
                            }
                        }
                    }
                }
                if out.len() >= n {
                    break;
                }
                side = (side as f64 * 1.15).ceil() as usize;
            }
            out
        }
    }
}

/// Immersion measure and the `x`-dependent projection outputs at one point.
fn evaluate(family: Family, base: &Base, x: [f64; 3]) -> crate::Result<(f64, Vec<f64>)> {
    match *base {
        Base::Restricted { sigma, x0, y0 } => {
            let c = CanonicalSampleRestricted {
                sigma,
                x0,
                y0,
                x: Vec3::from(x),
            };
            let proj = restricted_projection(&c)?;
            let m2 = restricted_m2(&c)?;
            let scale: f64 = (0..3).map(|r| m2.row(r).norm()).product();
            let measure = if scale > 0.0 {
                det3(&m2).abs() / scale
            } else {
                0.0
            };
            Ok((measure, proj[3..].to_vec()))
        }
        Base::Full {
            sigma,
            t,
            x0,
            alpha,
            beta,
        } => {
            let kind = family.kind();
            let c = CanonicalSampleFull {
                sigma,
                t,
                x0,
                alpha,
                beta,
                x: Vec3::from(x),
            };
            let proj = left_projection_full(kind, &c)?;
            let vars = [sigma, t, alpha, beta, x0.x, x0.y, x0.z, x[0], x[1], x[2]];
            let map = |v: &[f64]| {
                let c = CanonicalSampleFull {
                    sigma: v[0],
                    t: v[1],
                    alpha: v[2],
                    beta: v[3],
                    x0: Vec3::new(v[4], v[5], v[6]),
                    x: Vec3::new(v[7], v[8], v[9]),
                };
                left_projection_full(kind, &c)
                    .map(|p| p.to_vec())
                    .unwrap_or_else(|_| vec![f64::NAN; 14])
            };
            let jac: DMatrix<f64> = fd_jacobian(map, &vars);
            let sv = jac.singular_values();
            let max = sv.max();
            let min = sv.min();
            let measure = if max > 0.0 && min.is_finite() {
                min / max
            } else {
                0.0
            };
            Ok((measure, proj[7..].to_vec()))
        }
    }
}

struct BaseOutcome {
    n: usize,
    min: f64,
    max: f64,
    collisions: Vec<Collision>,
    failures: Vec<(usize, String)>,
}

fn scan_base(cfg: &ScanConfig, bi: usize, base: &Base, per_base: usize) -> BaseOutcome {
    let center = match *base {
        Base::Restricted { x0, y0, .. } => (x0, y0),
        Base::Full { .. } => (0.0, 0.0),
    };
    let points = lattice_points(&cfg.region, per_base, center);
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    let mut outputs: Vec<([f64; 3], Vec<f64>)> = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        match evaluate(cfg.family, base, x) {
            Ok((m, out)) => {
                min = min.min(m);
                max = max.max(m);
                outputs.push((x, out));
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }

    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, (_, out)) in outputs.iter().enumerate() {
        let key = out
            .iter()
            .map(|v| (v / COLLISION_QUANTUM).round() as i64)
            .collect();
        buckets.entry(key).or_default().push(i);
    }
    let mut collisions = Vec::new();
    let mut keys: Vec<_> = buckets.into_values().filter(|v| v.len() > 1).collect();
    keys.sort();
    for members in keys {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                let (a, b) = (outputs[i].0, outputs[j].0);
                if a != b {
                    collisions.push(Collision { base: bi, a, b });
                }
            }
        }
    }
    BaseOutcome {
        n: points.len(),
        min,
        max,
        collisions,
        failures,
    }
}

/// Runs the immersion and injectivity scan. Deterministic for a fixed
/// configuration regardless of the worker count.
pub fn bolker_scan(cfg: &ScanConfig) -> BolkerReport {
    let bases = draw_bases(cfg.family, cfg.n_bases, cfg.seed);
    let per_base = (cfg.n_samples / bases.len()).max(8);
    let outcomes: Vec<BaseOutcome> = bases
        .par_iter()
        .enumerate()
        .map(|(bi, b)| scan_base(cfg, bi, b, per_base))
        .collect();

    let mut report = BolkerReport {
        family: cfg.family,
        region: cfg.region.describe(),
        n_samples: 0,
        n_bases: bases.len(),
        min_immersion: f64::INFINITY,
        max_immersion: 0.0,
        collisions: Vec::new(),
        failures: Vec::new(),
    };
    for (bi, o) in outcomes.into_iter().enumerate() {
        report.n_samples += o.n;
        report.min_immersion = report.min_immersion.min(o.min);
        report.max_immersion = report.max_immersion.max(o.max);
        report.collisions.extend(o.collisions);
        report
            .failures
            .extend(o.failures.into_iter().map(|(i, e)| (bi * per_base + i, e)));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_axis_nodes_mirror_exactly() {
        let v = axis_nodes(-1.0, 1.0, 7);
        for k in 0..7 {
            assert_eq!(v[k], -v[6 - k]);
        }
    }

    #[test]
    fn lemon_upper_half_is_injective() {
        let cfg = ScanConfig::new(
            Family::RestrictedLemon,
            ScanRegion::Box {
                half_width: 1.0,
                zmin: 0.0,
                zmax: 1.0,
            },
            4000,
        );
        let r = bolker_scan(&cfg);
        assert_eq!(r.n_collisions(), 0);
        assert!(r.min_immersion > 0.0);
    }

    #[test]
    fn lemon_full_band_collides_by_reflection() {
        let cfg = ScanConfig::new(
            Family::RestrictedLemon,
            ScanRegion::Box {
                half_width: 1.0,
                zmin: -1.0,
                zmax: 1.0,
            },
            4000,
        );
        let r = bolker_scan(&cfg);
        assert!(r.n_collisions() > 0);
        assert_eq!(r.n_collisions(), r.n_reflection_pairs());
    }

    #[test]
    fn apple_hyperboloid_is_degenerate() {
        let cfg = ScanConfig::new(
            Family::RestrictedApple,
            ScanRegion::Hyperboloid {
                rho_min: 0.2,
                rho_max: 1.5,
            },
            2000,
        );
        let r = bolker_scan(&cfg);
        assert!(r.max_immersion < 1e-8, "{}", r.max_immersion);
    }

    #[test]
    fn scan_is_reproducible() {
        let cfg = ScanConfig {
            seed: 11,
            ..ScanConfig::new(Family::Full7dLemon, ScanRegion::Ball { radius: 1.0 }, 300)
        };
        assert_eq!(bolker_scan(&cfg), bolker_scan(&cfg));
    }
}
