//! Numerical wavefront-set detector.
//!
//! A point/direction pair `(x, xi)` is tested by multiplying the volume with
//! a separable raised-cosine bump centred on `x`, taking the FFT of the
//! windowed patch and fitting the decay of `|F(lambda xi)|` against
//! `log(1 + lambda)`. Slow decay (small fitted exponent) flags a
//! singularity. Among flagged pairs only the strongest direction at a
//! point is kept, and a point survives only if its high-frequency amplitude
//! is a local maximum along that direction; otherwise every voxel within a
//! window radius of an edge would be reported.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Vec3;
use crate::transforms::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavefrontConfig {
    /// Bump radius in voxels.
    pub window_radius: usize,
    /// Fitted exponents below this flag a singularity.
    pub exponent_cutoff: f64,
    /// Lowest window frequencies excluded from the fit.
    pub skip_low: usize,
    /// Upper end of the fit as a fraction of Nyquist.
    pub nyquist_fraction: f64,
}

impl Default for WavefrontConfig {
    fn default() -> Self {
        Self {
            window_radius: 8,
            exponent_cutoff: 3.6,
            skip_low: 4,
            nyquist_fraction: 0.8,
        }
    }
}

/// One point/direction query. `voxel` indexes the window centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavefrontQuery {
    pub voxel: [usize; 3],
    pub direction: Vec3<f64>,
}

impl WavefrontQuery {
    pub fn new(voxel: [usize; 3], direction: Vec3<f64>) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParams(
                "query direction must be nonzero".into(),
            ));
        }
        Ok(Self {
            voxel,
            direction: direction / n,
        })
    }
}

/// Fit result for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    /// Fitted `|F|` at the middle of the band; zero for a flat patch.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub voxel: [usize; 3],
    pub point: Vec3<f64>,
    pub direction: Vec3<f64>,
    pub exponent: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WavefrontReport {
    pub detections: Vec<Detection>,
}

impl WavefrontReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "dx", "dy", "dz", "exponent"])
            .map_err(csv_err)?;
        for d in &self.detections {
            w.write_record(
                [
                    d.point.x,
                    d.point.y,
                    d.point.z,
                    d.direction.x,
                    d.direction.y,
                    d.direction.z,
                    d.exponent,
                ]
                .iter()
                .map(|v| format!("{v:.17e}")),
            )
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `n` directions spread over the upper hemisphere (Fibonacci lattice).
/// `|F|` is even for real data, so a hemisphere covers every direction.
pub fn hemisphere_directions(n: usize) -> Vec<Vec3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Windowed spectra for one point, reused across directions.
struct Spectrum {
    size: usize,
    mag: Vec<f64>,
    scale: f64,
}

impl Spectrum {
    /// Trilinear interpolation of `|F|` at a frequency given in FFT bins,
    /// with periodic wrap.
    fn sample(&self, f: Vec3<f64>) -> f64 {
        let n = self.size as isize;
        let base = [f.x.floor(), f.y.floor(), f.z.floor()];
        let frac = [f.x - base[0], f.y - base[1], f.z - base[2]];
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                idx[a] = (base[a] as isize + hi as isize).rem_euclid(n) as usize;
            }
            acc += w * self.mag[(idx[2] * self.size + idx[1]) * self.size + idx[0]];
        }
        acc
    }
}

/// Detector bound to one volume and configuration.
pub struct Detector<'a> {
    volume: &'a VoxelGrid<f64>,
    cfg: WavefrontConfig,
    size: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl<'a> Detector<'a> {
    pub fn new(volume: &'a VoxelGrid<f64>, cfg: WavefrontConfig) -> Result<Self> {
        if cfg.window_radius < 2 {
            return Err(Error::InvalidParams(
                "window radius must be at least 2".into(),
            ));
        }
        if !(cfg.nyquist_fraction > 0.0 && cfg.nyquist_fraction <= 1.0) {
            return Err(Error::InvalidParams(
                "nyquist fraction must lie in (0, 1]".into(),
            ));
        }
        let r = cfg.window_radius;
        // zero padding to twice the window diameter gives half-bin ray sampling
        let size = (4 * r).next_power_of_two();
        let window = (0..=2 * r)
            .map(|i| {
                let d = (i as f64 - r as f64) / r as f64;
                0.5 * (1.0 + (std::f64::consts::PI * d).cos())
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        Ok(Self {
            volume,
            cfg,
            size,
            window,
            fft,
        })
    }

    pub fn config(&self) -> &WavefrontConfig {
        &self.cfg
    }

    /// Whether a window centred on `voxel` stays inside the volume.
    pub fn fits(&self, voxel: [usize; 3]) -> bool {
        let r = self.cfg.window_radius;
        (0..3).all(|a| voxel[a] >= r && voxel[a] + r < self.volume.spec.dims[a])
    }

    fn spectrum(&self, voxel: [usize; 3]) -> Result<Option<Spectrum>> {
        if !self.fits(voxel) {
            return Err(Error::WindowOutOfBounds(voxel));
        }
        let r = self.cfg.window_radius;
        let d = 2 * r + 1;
        let n = self.size;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut buf = vec![Complex::new(0.0, 0.0); n * n * n];
        for k in 0..d {
            for j in 0..d {
                for i in 0..d {
                    let v = self
                        .volume
                        .get(voxel[0] + i - r, voxel[1] + j - r, voxel[2] + k - r);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    let w = self.window[i] * self.window[j] * self.window[k];
                    buf[(k * n + j) * n + i] = Complex::new(w * v, 0.0);
                }
            }
        }
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            return Ok(None);
        }
        fft3(&*self.fft, &mut buf, n);
        let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let scale = mag.iter().cloned().fold(0.0, f64::max);
        Ok(Some(Spectrum {
            size: n,
            mag: envelope(mag, n),
            scale,
        }))
    }

    /// Ray samples as `(log(1 + lambda), log|F|)` with `lambda` in window
    /// bins. Samples lost in round-off are dropped.
    fn ray(&self, spec: &Spectrum, dir: &Vec3<f64>) -> Vec<(f64, f64)> {
        let diameter = (2 * self.cfg.window_radius) as f64;
        let pad = self.size as f64 / diameter;
        let lambda_max = self.cfg.nyquist_fraction * diameter / 2.0;
        let floor = spec.scale * NOISE_FLOOR;
        let mut out = Vec::new();
        let mut lambda = self.cfg.skip_low as f64;
        while lambda <= lambda_max + 1e-12 {
            let m = spec.sample(dir * (lambda * pad));
            if m > floor {
                out.push(((1.0 + lambda).ln(), m.ln()));
            }
            lambda += 0.25;
        }
        out
    }

    fn fit_ray(&self, spec: &Spectrum, dir: &Vec3<f64>) -> DecayFit {
        let samples = self.ray(spec, dir);
        if samples.len() < 3 {
            // already at round-off level across the band
            return flat();
        }
        fit_line(&samples)
    }

    /// Fitted decay exponent and band amplitude at one query.
    pub fn fit(&self, q: &WavefrontQuery) -> Result<DecayFit> {
        match self.spectrum(q.voxel)? {
            None => Ok(flat()),
            Some(spec) => Ok(self.fit_ray(&spec, &q.direction)),
        }
    }

    /// Fits for every direction at one point, sharing one FFT.
    pub fn fit_directions(&self, voxel: [usize; 3], dirs: &[Vec3<f64>]) -> Result<Vec<DecayFit>> {
        match self.spectrum(voxel)? {
            None => Ok(vec![flat(); dirs.len()]),
            Some(spec) => Ok(dirs.iter().map(|d| self.fit_ray(&spec, d)).collect()),
        }
    }
}

/// Relative magnitude below which spectra are treated as round-off.
const NOISE_FLOOR: f64 = 1e-11;

/// Running maximum over the 3x3x3 neighbourhood (periodic), which bridges
/// the zeros between window sidelobes so the fit sees their envelope.
fn envelope(mut mag: Vec<f64>, n: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; mag.len()];
    for stride in [1, n, n * n] {
        for (idx, out) in tmp.iter_mut().enumerate() {
            let c = (idx / stride) % n;
            let base = idx - c * stride;
            let prev = base + ((c + n - 1) % n) * stride;
            let next = base + ((c + 1) % n) * stride;
            *out = mag[idx].max(mag[prev]).max(mag[next]);
        }
        std::mem::swap(&mut mag, &mut tmp);
    }
    mag
}

fn flat() -> DecayFit {
    DecayFit {
        exponent: f64::INFINITY,
        amplitude: 0.0,
    }
}

/// Least-squares line through `(x, y)`; exponent is minus the slope.
fn fit_line(samples: &[(f64, f64)]) -> DecayFit {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    DecayFit {
        exponent: -slope,
        amplitude: my.exp(),
    }
}

fn fft3(fft: &dyn Fft<f64>, buf: &mut [Complex<f64>], n: usize) {
    // x lines are contiguous
    fft.process(buf);
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                line[j] = buf[(k * n + j) * n + i];
            }
            fft.process(&mut line);
            for j in 0..n {
                buf[(k * n + j) * n + i] = line[j];
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                line[k] = buf[(k * n + j) * n + i];
            }
            fft.process(&mut line);
            for k in 0..n {
                buf[(k * n + j) * n + i] = line[k];
            }
        }
    }
}

/// Points visited by [`wf_detect`]: every `stride`-th voxel whose window fits,
/// paired with a shared direction set.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGrid {
    pub stride: usize,
    pub directions: Vec<Vec3<f64>>,
}

impl Default for QueryGrid {
    fn default() -> Self {
        Self {
            stride: 1,
            directions: hemisphere_directions(64),
        }
    }
}

/// Best flagged direction at one point.
#[derive(Clone, Copy)]
struct Candidate {
    dir: usize,
    exponent: f64,
}

/// Scans the query grid and returns the detections, in voxel order.
pub fn wf_detect(
    volume: &VoxelGrid<f64>,
    grid: &QueryGrid,
    cfg: WavefrontConfig,
) -> Result<WavefrontReport> {
    if grid.stride == 0 || grid.directions.is_empty() {
        return Err(Error::InvalidParams(
            "query grid needs a positive stride and directions".into(),
        ));
    }
    let dirs: Vec<Vec3<f64>> = grid
        .directions
        .iter()
        .map(|d| WavefrontQuery::new([0; 3], *d).map(|q| q.direction))
        .collect::<Result<_>>()?;
    let det = Detector::new(volume, cfg)?;
    let dims = volume.spec.dims;
    let r = cfg.window_radius;
    if (0..3).any(|a| dims[a] < 2 * r + 1) {
        return Err(Error::WindowOutOfBounds([r, r, r]));
    }
    let axis = |a: usize| (r..dims[a] - r).step_by(grid.stride).collect::<Vec<_>>();
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let mut points = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &k in &zs {
        for &j in &ys {
            points.extend(xs.iter().map(|&i| [i, j, k]));
        }
    }

    // per point: best flagged direction and the amplitude in every direction
    let fits: Vec<(Option<Candidate>, Vec<f32>)> = points
        .par_iter()
        .map(|&v| {
            let fits = det.fit_directions(v, &dirs)?;
            let best = fits
                .iter()
                .enumerate()
                .filter(|(_, f)| f.exponent < cfg.exponent_cutoff)
                .max_by(|a, b| a.1.amplitude.total_cmp(&b.1.amplitude))
                .map(|(dir, f)| Candidate {
                    dir,
                    exponent: f.exponent,
                });
            Ok((best, fits.iter().map(|f| f.amplitude as f32).collect()))
        })
        .collect::<Result<_>>()?;

    let index = |v: [isize; 3]| -> Option<usize> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let off = v[a] - r as isize;
            if off < 0 || v[a] >= (dims[a] - r) as isize || off % grid.stride as isize != 0 {
                return None;
            }
            out[a] = (off / grid.stride as isize) as usize;
        }
        Some((out[2] * ys.len() + out[1]) * xs.len() + out[0])
    };
    let amp_at = |v: [isize; 3], dir: usize| index(v).map_or(0.0, |i| fits[i].1[dir]);

    let keep: Vec<Option<Detection>> = points
        .par_iter()
        .zip(fits.par_iter())
        .map(|(&v, (c, amps))| {
            let c = (*c)?;
            let d = dirs[c.dir];
            // a unit vector always has a component above 1/sqrt(3), so the
            // rounded step is never zero
            let step = [0, 1, 2].map(|a| d[a].round() as isize * grid.stride as isize);
            let vi = [v[0] as isize, v[1] as isize, v[2] as isize];
            let fwd = [0, 1, 2].map(|a| vi[a] + step[a]);
            let back = [0, 1, 2].map(|a| vi[a] - step[a]);
            let here = amps[c.dir];
            // ties go to the backward side so a plateau yields one layer
            if here > amp_at(back, c.dir) && here >= amp_at(fwd, c.dir) {
                Some(Detection {
                    voxel: v,
                    point: volume.spec.center(v[0], v[1], v[2]),
                    direction: d,
                    exponent: c.exponent,
                })
            } else {
                None
            }
        })
        .collect();

    Ok(WavefrontReport {
        detections: keep.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::GridSpec;

    fn volume(n: usize, f: impl Fn(Vec3<f64>) -> f64) -> VoxelGrid<f64> {
        let spec = GridSpec::cube(n, 1.0).unwrap();
        let values = (0..spec.len()).map(|i| f(spec.center_of(i))).collect();
        VoxelGrid::from_values(spec, values).unwrap()
    }

    #[test]
    fn directions_are_unit_and_upper() {
        for d in hemisphere_directions(50) {
            assert!((d.norm() - 1.0).abs() < 1e-12 && d.z > 0.0);
        }
    }

    #[test]
    fn window_out_of_bounds() {
        let v = volume(20, |_| 0.0);
        let det = Detector::new(&v, WavefrontConfig::default()).unwrap();
        let q = WavefrontQuery::new([3, 10, 10], Vec3::x()).unwrap();
        assert!(matches!(
            det.fit(&q),
            Err(Error::WindowOutOfBounds([3, 10, 10]))
        ));
    }

    #[test]
    fn plane_edge_is_slow_across_fast_along() {
        let v = volume(32, |x| if x.x > 0.01 { 1.0 } else { 0.0 });
        let det = Detector::new(&v, WavefrontConfig::default()).unwrap();
        let c = [16, 16, 16];
        let normal = det
            .fit(&WavefrontQuery::new(c, Vec3::x()).unwrap())
            .unwrap();
        let along = det
            .fit(&WavefrontQuery::new(c, Vec3::y()).unwrap())
            .unwrap();
        assert!(normal.exponent < 2.5, "{normal:?}");
        assert!(along.exponent > normal.exponent + 2.0, "{along:?}");
    }

    #[test]
    fn flat_patch_is_never_singular() {
        let v = volume(20, |_| 3.0);
        let r = wf_detect(&v, &QueryGrid::default(), WavefrontConfig::default()).unwrap();
        assert!(r.detections.is_empty());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        WavefrontReport::default().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "x,y,z,dx,dy,dz,exponent"
        );
    }
}
