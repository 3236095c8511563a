//! File formats.
//!
//! * Volumes: raw little-endian samples (x fastest) plus a TOML sidecar at
//!   `<path>.toml` holding dims, spacing, origin and the sample type.
//! * Parameter lists: CSV with header `p,x0,y0` (restricted family) or
//!   `s,t,x0,y0,z0,alpha,beta` (full family).
//! * Projection data: CSV `index,value`.
//! * Residual logs: CSV `iteration,residual`.
//! * Reports: `key=value` lines.
//!
//! Floats are written in Rust's shortest round-trip form, so every format
//! reads back to identical values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SurfaceKind, TorusParams};
use crate::scalar::Vec3;
use crate::transforms::{GridSpec, ProjectionParams, RestrictedParams, VoxelGrid};

/// Sample type of a volume payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    F32,
    #[default]
    F64,
}

impl SampleType {
    fn width(self) -> usize {
        match self {
            SampleType::F32 => 4,
            SampleType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    #[serde(default)]
    dtype: SampleType,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

pub fn write_volume(path: &Path, vol: &VoxelGrid<f64>, dtype: SampleType) -> Result<()> {
    let header = VolumeHeader {
        dims: vol.spec.dims,
        spacing: vol.spec.spacing.into(),
        origin: vol.spec.origin.into(),
        dtype,
    };
    let text = toml::to_string(&header).map_err(|e| parse_err(path, e))?;
    fs::write(sidecar_path(path), text)?;
    let mut bytes = Vec::with_capacity(vol.values.len() * dtype.width());
    for v in &vol.values {
        match dtype {
            SampleType::F32 => bytes.extend_from_slice(&(*v as f32).to_le_bytes()),
            SampleType::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_volume(path: &Path) -> Result<VoxelGrid<f64>> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)?;
    let h: VolumeHeader = toml::from_str(&text).map_err(|e| parse_err(&side, e))?;
    let spec = GridSpec::new(h.dims, Vec3::from(h.spacing), Vec3::from(h.origin))?;
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let w = h.dtype.width();
    if bytes.len() != spec.len() * w {
        return Err(Error::Dimension(format!(
            "{}: expected {} bytes for {:?} {:?} samples, found {}",
            path.display(),
            spec.len() * w,
            h.dims,
            h.dtype,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(w)
        .map(|c| match h.dtype {
            SampleType::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
            SampleType::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
        })
        .collect();
    VoxelGrid::from_values(spec, values)
}

const RESTRICTED_HEADER: [&str; 3] = ["p", "x0", "y0"];
const FULL_HEADER: [&str; 7] = ["s", "t", "x0", "y0", "z0", "alpha", "beta"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, format!("{other:?}")),
    }
}

/// Reads a parameter list; the header selects the family. An empty file is
/// an empty list. Full-family rows take the surface kind from `kind`.
pub fn read_params(path: &Path, kind: SurfaceKind) -> Result<Vec<ProjectionParams<f64>>> {
    let text = fs::read_to_string(path)?;
    parse_params(&text, kind).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_params(text: &str, kind: SurfaceKind) -> Result<Vec<ProjectionParams<f64>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let restricted = header == RESTRICTED_HEADER;
    if !restricted && header != FULL_HEADER {
        return Err(Error::Parse(format!(
            "parameter header must be `{}` or `{}`, found `{}`",
            RESTRICTED_HEADER.join(","),
            FULL_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: `{f}`: {e}", row + 1)))
            })
            .collect::<Result<_>>()?;
        let p = if restricted {
            RestrictedParams::new(v[0], v[1], v[2]).map(ProjectionParams::from)
        } else {
            TorusParams::new(v[0], v[1], Vec3::new(v[2], v[3], v[4]), v[5], v[6], kind)
                .map(ProjectionParams::from)
        };
        out.push(p.map_err(|e| Error::Element {
            index: row,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}

/// Writes a parameter list; all entries must belong to one family.
pub fn write_params<W: Write>(out: W, params: &[ProjectionParams<f64>]) -> Result<()> {
    let restricted = match params.first() {
        None | Some(ProjectionParams::Restricted(_)) => true,
        Some(ProjectionParams::Full(_)) => false,
    };
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_err(Path::new("<params>"), e);
    if restricted {
        w.write_record(RESTRICTED_HEADER).map_err(io)?;
    } else {
        w.write_record(FULL_HEADER).map_err(io)?;
    }
    for p in params {
        match (p, restricted) {
            (ProjectionParams::Restricted(r), true) => w
                .write_record([r.p, r.x0, r.y0].map(|v| v.to_string()))
                .map_err(io)?,
            (ProjectionParams::Full(t), false) => w
                .write_record(
                    [t.s, t.t, t.x0.x, t.x0.y, t.x0.z, t.alpha, t.beta].map(|v| v.to_string()),
                )
                .map_err(io)?,
            _ => return Err(Error::InvalidParams("parameter list mixes families".into())),
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `index,value` rows; indices must be `0..n` in order. Empty input
/// is an empty vector.
pub fn parse_data(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["index", "value"] {
        return Err(Error::Parse(format!(
            "data header must be `index,value`, found `{}`",
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let idx: usize = rec[0]
            .parse()
            .map_err(|e| Error::Parse(format!("index `{}`: {e}", &rec[0])))?;
        if idx != out.len() {
            return Err(Error::Parse(format!(
                "expected index {}, found {idx}",
                out.len()
            )));
        }
        out.push(
            rec[1]
                .parse()
                .map_err(|e| Error::Parse(format!("value `{}`: {e}", &rec[1])))?,
        );
    }
    Ok(out)
}

pub fn read_data(path: &Path) -> Result<Vec<f64>> {
    parse_data(&fs::read_to_string(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_data<W: Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_err(Path::new("<data>"), e);
    w.write_record(["index", "value"]).map_err(io)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals<W: Write>(out: W, residuals: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_err(Path::new("<residuals>"), e);
    w.write_record(["iteration", "residual"]).map_err(io)?;
    for (i, v) in residuals.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Ordered `key=value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::Parse(format!("report line without `=`: `{l}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }
}
