//! `spindle`: command-line front end for the spindle-torus transforms.
//!
//! Exit status is 0 on success, 1 on any validation or runtime error and 2
//! when a verification suite reports failures. Errors are printed to stderr
//! as a single `error: kind=<tag> message=<text>` line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spindle_radon::io::{
    read_data, read_params, read_volume, write_data, write_residuals, write_volume, Report,
    SampleType,
};
use spindle_radon::microlocal::{
    bolker_scan, cone_angle_degrees, predict_artifacts, ring_mask, Family, ScanConfig, ScanRegion,
};
use spindle_radon::recon::{reconstruct, LandweberConfig};
use spindle_radon::verify::{run_suite, Suite};
use spindle_radon::wavefront::{hemisphere_directions, wf_detect, QueryGrid, WavefrontConfig};
use spindle_radon::{
    adjoint_project, forward_project, DataGrid, Error, GridSpec, PhantomSpec, QuadratureSpec,
    SurfaceKind, Vec3, VoxelGrid,
};

#[derive(Parser, Debug)]
#[command(
    name = "spindle",
    version,
    about = "Apple and lemon torus Radon transforms"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rasterize a phantom spec onto a voxel grid.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Sub-samples per axis when rasterizing.
        #[arg(long, default_value_t = 1)]
        supersample: usize,
        #[arg(long, default_value = "f64", value_parser = parse_dtype)]
        dtype: SampleType,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-project a volume onto a parameter list.
    Project {
        #[arg(long)]
        vol: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        kind: SurfaceKind,
        #[arg(long, default_value = "64,128", value_parser = parse_quad)]
        quad: QuadratureSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Back-project data onto a voxel grid.
    Adjoint {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        kind: SurfaceKind,
        #[arg(long, default_value = "64,128", value_parser = parse_quad)]
        quad: QuadratureSpec,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Landweber reconstruction.
    Recon {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        kind: SurfaceKind,
        #[arg(long, default_value = "64,128", value_parser = parse_quad)]
        quad: QuadratureSpec,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 1.0)]
        step_scale: f64,
        #[arg(long)]
        nonnegativity: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Residual log; defaults to the report path with `.residuals.csv`.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Run the identity verification suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample the Bolker condition for a family.
    Bolker {
        #[arg(long)]
        family: Family,
        /// `box:W,ZMIN,ZMAX`, `hyperboloid:RMIN,RMAX`,
        /// `u-above:W,ZMIN,ZMAX,MARGIN`, `ball-slab:ZMIN,ZMAX,MARGIN` or
        /// `ball:R`; the family's valid region by default.
        #[arg(long)]
        region: Option<ScanRegion>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predicted artifact rings, or the cone-beam opening angle.
    Predict(PredictArgs),
    /// Numerical wavefront-set detection on a volume.
    Wfset {
        #[arg(long)]
        vol: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 64)]
        directions: usize,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Voxel counts `NX,NY,NZ`.
    #[arg(long, value_parser = parse_dims)]
    grid: [usize; 3],
    /// Box `XMIN,XMAX,YMIN,YMAX,ZMIN,ZMAX` covered by the grid.
    #[arg(long, default_value = "-1,1,-1,1,-1,1", value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: [f64; 6],
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec<f64>, Error> {
        let b = self.bounds;
        GridSpec::covering(
            self.grid,
            Vec3::new(b[0], b[2], b[4]),
            Vec3::new(b[1], b[3], b[5]),
        )
    }
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Print the opening angle for `--epsilon` instead of rings.
    #[arg(long, requires = "epsilon", conflicts_with_all = ["family", "params"])]
    cone_angle: bool,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, required_unless_present = "cone_angle")]
    family: Option<Family>,
    #[arg(long, required_unless_present = "cone_angle")]
    params: Option<PathBuf>,
    /// Ring CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a ring mask volume; needs `--grid`.
    #[arg(long, requires = "grid")]
    mask: Option<PathBuf>,
    #[arg(long, value_parser = parse_dims)]
    grid: Option<[usize; 3]>,
    #[arg(long, default_value = "-1,1,-1,1,-1,1", value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: [f64; 6],
    /// Mask dilation in voxels.
    #[arg(long, default_value_t = 2.0)]
    dilation: f64,
}

enum Failure {
    Lib(Error),
    Usage(String),
    Suite(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn parse_list<const N: usize, V: std::str::FromStr>(s: &str) -> Result<[V; N], String> {
    let parts: Vec<V> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<V>()
                .map_err(|_| format!("bad entry `{p}` in `{s}`"))
        })
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated values, got `{s}`"))
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

fn parse_bounds(s: &str) -> Result<[f64; 6], String> {
    parse_list(s)
}

fn parse_quad(s: &str) -> Result<QuadratureSpec, String> {
    let [n_psi, n_theta] = parse_list(s)?;
    QuadratureSpec::new(n_psi, n_theta).map_err(|e| e.to_string())
}

fn parse_dtype(s: &str) -> Result<SampleType, String> {
    match s {
        "f32" => Ok(SampleType::F32),
        "f64" => Ok(SampleType::F64),
        _ => Err(format!("dtype must be f32 or f64, got `{s}`")),
    }
}

fn need_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn need_dir_for(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Failure::Usage(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Phantom {
            spec,
            grid,
            supersample,
            dtype,
            out,
        } => {
            need_file(&spec)?;
            need_dir_for(&out)?;
            let gs = grid.spec()?;
            let phantom = PhantomSpec::<f64>::from_toml_str(&std::fs::read_to_string(&spec)?)?;
            let vol = phantom.rasterize_supersampled(&gs, supersample.max(1));
            write_volume(&out, &vol, dtype)?;
        }
        Command::Project {
            vol,
            params,
            kind,
            quad,
            out,
        } => {
            need_file(&vol)?;
            need_file(&params)?;
            need_dir_for(&out)?;
            let plist = read_params(&params, kind)?;
            let volume = read_volume(&vol)?;
            let data = forward_project(&volume, &plist, kind, quad)?;
            write_data(create(&out)?, &data.values)?;
        }
        Command::Adjoint {
            data,
            params,
            kind,
            quad,
            grid,
            out,
        } => {
            need_file(&data)?;
            need_file(&params)?;
            need_dir_for(&out)?;
            let gs = grid.spec()?;
            let d = DataGrid::new(read_params(&params, kind)?, read_data(&data)?)?;
            let vol = adjoint_project(&d, kind, quad, &gs)?;
            write_volume(&out, &vol, SampleType::F64)?;
        }
        Command::Recon {
            data,
            params,
            kind,
            quad,
            grid,
            iters,
            step_scale,
            nonnegativity,
            out,
            report,
            residuals,
        } => {
            need_file(&data)?;
            need_file(&params)?;
            need_dir_for(&out)?;
            need_dir_for(&report)?;
            let residuals = residuals.unwrap_or_else(|| {
                let mut s = report.as_os_str().to_owned();
                s.push(".residuals.csv");
                PathBuf::from(s)
            });
            need_dir_for(&residuals)?;
            if iters == 0 {
                return Err(Failure::Usage("--iters must be positive".into()));
            }
            let gs = grid.spec()?;
            let d = DataGrid::new(read_params(&params, kind)?, read_data(&data)?)?;
            let cfg = LandweberConfig {
                step_scale,
                iterations: iters,
                nonnegativity,
            };
            let rep = reconstruct(&d, kind, quad, &gs, &cfg)?;
            write_volume(&out, &rep.volume, SampleType::F64)?;
            std::fs::write(&report, rep.to_report().to_text())?;
            write_residuals(create(&residuals)?, &rep.residual_norms)?;
        }
        Command::Verify {
            suite,
            samples,
            seed,
            report,
        } => {
            if let Some(r) = &report {
                need_dir_for(r)?;
            }
            let rep = run_suite(suite, samples, seed)?;
            let text = rep.to_text();
            match &report {
                Some(r) => std::fs::write(r, &text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
            if !rep.passed() {
                return Err(Failure::Suite(format!(
                    "{} of {} checks failed",
                    rep.n_failed(),
                    rep.checks.len()
                )));
            }
        }
        Command::Bolker {
            family,
            region,
            samples,
            seed,
            report,
        } => {
            if let Some(r) = &report {
                need_dir_for(r)?;
            }
            let region = region.unwrap_or_else(|| ScanRegion::valid_default(family));
            let mut cfg = ScanConfig::new(family, region, samples);
            cfg.seed = seed;
            let text = bolker_scan(&cfg).to_text();
            match &report {
                Some(r) => std::fs::write(r, &text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Predict(args) => predict(args)?,
        Command::Wfset {
            vol,
            out,
            stride,
            directions,
            cutoff,
            window,
        } => {
            need_file(&vol)?;
            need_dir_for(&out)?;
            let mut cfg = WavefrontConfig::default();
            if let Some(c) = cutoff {
                cfg.exponent_cutoff = c;
            }
            if let Some(w) = window {
                cfg.window_radius = w;
            }
            let grid = QueryGrid {
                stride,
                directions: hemisphere_directions(directions),
            };
            let volume = read_volume(&vol)?;
            wf_detect(&volume, &grid, cfg)?.write_csv(create(&out)?)?;
        }
    }
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Failure> {
    if args.cone_angle {
        let eps = args.epsilon.unwrap_or_default();
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Failure::Lib(Error::InvalidParams(format!(
                "epsilon must be positive, got {eps}"
            ))));
        }
        let mut r = Report::new();
        r.push("epsilon", eps)
            .push("gamma_degrees", cone_angle_degrees(eps));
        print!("{}", r.to_text());
        return Ok(());
    }
    let (Some(family), Some(params)) = (args.family, args.params.as_ref()) else {
        return Err(Failure::Usage("predict needs --family and --params".into()));
    };
    need_file(params)?;
    if let Some(o) = &args.out {
        need_dir_for(o)?;
    }
    if let Some(m) = &args.mask {
        need_dir_for(m)?;
    }
    let plist = read_params(params, family.kind())?;
    let sets = plist
        .iter()
        .enumerate()
        .map(|(i, p)| {
            predict_artifacts(family, p).map_err(|e| Error::Element {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = String::from("index,ring,cx,cy,cz,ax,ay,az,radius\n");
    for (i, set) in sets.iter().enumerate() {
        for (k, r) in set.rings.iter().enumerate() {
            text.push_str(&format!(
                "{i},{k},{},{},{},{},{},{},{}\n",
                r.center.x, r.center.y, r.center.z, r.axis.x, r.axis.y, r.axis.z, r.radius
            ));
        }
    }
    match &args.out {
        Some(o) => std::fs::write(o, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    if let (Some(mask), Some(dims)) = (&args.mask, args.grid) {
        let b = args.bounds;
        let gs = GridSpec::covering(
            dims,
            Vec3::new(b[0], b[2], b[4]),
            Vec3::new(b[1], b[3], b[5]),
        )?;
        let m = ring_mask(sets.iter().flat_map(|s| &s.rings), &gs, args.dilation);
        let vol =
            VoxelGrid::from_values(gs, m.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect())?;
        write_volume(mask, &vol, SampleType::F32)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage message={first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: kind={} message={e}", e.kind());
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: kind=usage message={m}");
            ExitCode::from(1)
        }
        Err(Failure::Suite(m)) => {
            eprintln!("error: kind=suite-failure message={m}");
            ExitCode::from(2)
        }
    }
}
