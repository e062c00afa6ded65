//! `nitiflex` command-line front end.
//!
//! Exit status: 0 on success, 1 on a domain or solver error (the error kind
//! is printed), 2 on a usage error.

mod config;

use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nitiflex::bench::{self, BenchError, PlotSeries};
use nitiflex::lasercal::{self, AblationSetting, LaserConfig, LaserError};
use nitiflex::material::{self, MaterialError};
use nitiflex::mechanics::{self, HingeSpec, MechanicsError, Sides, SolverOptions};
use nitiflex::planner::{self, DepthMap, LayerPlan, PlannerError, ScanAngle};
use nitiflex::toolpath::{Toolpath, ToolpathError};
use thiserror::Error;

use config::ProjectConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Laser(#[from] LaserError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Toolpath(#[from] ToolpathError),
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Material(e) => e.kind(),
            Self::Mechanics(e) => e.kind(),
            Self::Laser(e) => e.kind(),
            Self::Planner(e) => e.kind(),
            Self::Bench(e) => e.kind(),
            Self::Toolpath(e) => e.kind(),
            Self::Config(_) => "Config",
            Self::Missing(_) => "Missing",
            Self::Io(_) => "Io",
        }
    }

    fn module(&self) -> &'static str {
        match self {
            Self::Material(_) => "MaterialError",
            Self::Mechanics(_) => "MechanicsError",
            Self::Laser(_) => "LaserError",
            Self::Planner(_) => "PlannerError",
            Self::Bench(_) => "BenchError",
            Self::Toolpath(_) => "ToolpathError",
            Self::Config(_) | Self::Missing(_) | Self::Io(_) => "CliError",
        }
    }
}

#[derive(Parser)]
#[command(name = "nitiflex", version, about = "Nitinol living-hinge modeling and laser fabrication planning")]
struct Cli {
    /// Project file with default paths and laser setting.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Superelastic material fitting.
    #[command(subcommand)]
    Material(MaterialCmd),
    /// Torque-angle prediction and strain-limit sizing.
    #[command(subcommand)]
    Hinge(HingeCmd),
    /// Etch-rate calibration.
    #[command(subcommand)]
    Laser(LaserCmd),
    /// Depth maps, slicing, raster toolpaths and tolerance checks.
    #[command(subcommand)]
    Plan(PlanCmd),
    /// Torque-bench trial processing.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum MaterialCmd {
    /// Fit a bilinear law to `strain,stress_pa` tensile data.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        /// Elastic strain limit recorded in the fitted material.
        #[arg(long, default_value_t = material::DEFAULT_EPS_MAX)]
        eps_max: f64,
        /// Write the fitted material as TOML.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct HingeInput {
    /// Hinge spec TOML (defaults to the project's `hinge_spec`).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Material TOML replacing the one in the spec.
    #[arg(long)]
    material: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    stations: usize,
    #[arg(long, default_value_t = 2000)]
    fibers: usize,
}

#[derive(Subcommand)]
enum HingeCmd {
    /// Torque, energy and peak strain at one angle.
    Torque {
        #[command(flatten)]
        input: HingeInput,
        #[arg(long, allow_negative_numbers = true)]
        theta_deg: f64,
    },
    /// Uniform sweep from 0 to a maximum angle, written as CSV.
    Sweep {
        #[command(flatten)]
        input: HingeInput,
        #[arg(long, default_value_t = 40.0)]
        theta_max_deg: f64,
        #[arg(long, default_value_t = 41)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<stem>.svg` and `<stem>.plot.csv`.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Elastic-range sizing. With a spec, the largest angle before the strain
    /// limit; with `--theta-deg` and `--length-um`, the thickest rectangular
    /// hinge that reaches the angle.
    Limit {
        #[command(flatten)]
        input: HingeInput,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, requires = "length_um")]
        theta_deg: Option<f64>,
        #[arg(long, requires = "theta_deg")]
        length_um: Option<f64>,
    },
}

#[derive(Subcommand)]
enum LaserCmd {
    /// Fit etch rates per repetition rate from `rep_rate_khz,passes,depth_um`.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        /// Also select a setting for this depth per layer.
        #[arg(long)]
        target_um: Option<f64>,
        #[arg(long, default_value_t = 14)]
        max_passes: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characterization array toolpath.
    Grid {
        /// Comma-separated repetition rates, kHz.
        #[arg(long, value_delimiter = ',', default_value = "150,175,200,225,250")]
        rates: Vec<f64>,
        /// Pass range, e.g. `1-14`.
        #[arg(long, default_value = "1-14", value_parser = parse_range)]
        passes: RangeInclusive<u32>,
        #[arg(long, default_value_t = 200.0)]
        side_um: f64,
        #[arg(long)]
        pitch_um: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        gap_um: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dxf: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlanCmd {
    /// Target depth map from a hinge spec.
    Depthmap {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        pitch_um: Option<f64>,
        #[arg(long, default_value = "one")]
        sides: Sides,
        /// Zero-depth border, in cells.
        #[arg(long, default_value_t = 2)]
        margin: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Slice a depth map into nested layers.
    Slice {
        #[arg(long)]
        depthmap: PathBuf,
        #[arg(long)]
        depth_per_layer: Option<f64>,
        #[arg(long)]
        passes: Option<u32>,
        #[arg(long)]
        rep_rate_khz: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Raster a layer plan into a toolpath.
    Raster {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "0")]
        angle: ScanAngle,
        /// Scan every line in the same direction.
        #[arg(long)]
        no_serpentine: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dxf: Option<PathBuf>,
    },
    /// Check a plan against its target depth map.
    Verify {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        depthmap: PathBuf,
        /// Defaults to half a layer.
        #[arg(long)]
        tolerance_um: Option<f64>,
    },
    /// Compare a measured surface with the designed depth map.
    Tolerance {
        #[arg(long)]
        designed: PathBuf,
        #[arg(long)]
        measured: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        band_um: f64,
        /// Section row; defaults to the middle row.
        #[arg(long)]
        row: Option<usize>,
        /// Section profile CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Filter and average a directory of trial CSVs.
    Aggregate {
        #[arg(long)]
        dir: PathBuf,
        /// Moment arm for `theta_rad,force_n` files, m.
        #[arg(long)]
        arm_m: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        grid_step_deg: f64,
        #[arg(long, default_value_t = bench::DEFAULT_FILTER_ORDER)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Score a model sweep against an aggregate.
    Compare {
        /// Sweep CSV from `hinge sweep`.
        #[arg(long)]
        model: PathBuf,
        /// Aggregate CSV from `bench aggregate`.
        #[arg(long)]
        aggregate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in `{s}`"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad range end in `{s}`"))?;
    if a == 0 || b < a {
        return Err(format!("range `{s}` must be ascending and start at 1 or more"));
    }
    Ok(a..=b)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}::{}]: {e}", e.module(), e.kind());
            ExitCode::from(1)
        }
    }
}

struct Ctx {
    cfg: ProjectConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default(),
    };
    let ctx = Ctx { cfg };
    match cli.command {
        Command::Material(c) => material_cmd(&ctx, c),
        Command::Hinge(c) => hinge_cmd(&ctx, c),
        Command::Laser(c) => laser_cmd(&ctx, c),
        Command::Plan(c) => plan_cmd(&ctx, c),
        Command::Bench(c) => bench_cmd(&ctx, c),
    }
}

/// Writes through a sibling temp file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

fn read_file(path: &Path) -> Result<std::io::BufReader<std::fs::File>, CliError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl Ctx {
    fn out(&self, p: &Path) -> PathBuf {
        self.cfg.output_path(p)
    }

    fn write(&self, p: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out(p);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    fn pitch(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.pitch_um).unwrap_or(planner::DEFAULT_PITCH_UM)
    }

    fn hinge(&self, spec: Option<&Path>, material: Option<&Path>) -> Result<HingeSpec, CliError> {
        let spec = spec
            .map(Path::to_path_buf)
            .or_else(|| self.cfg.hinge_spec.clone())
            .ok_or_else(|| CliError::Missing("--spec (or hinge_spec in the project file)".into()))?;
        let h = mechanics::load_hinge_spec(&spec)?;
        let Some(mat_path) = material.map(Path::to_path_buf).or_else(|| self.cfg.material.clone()) else {
            return Ok(h);
        };
        let text = std::fs::read_to_string(&mat_path)
            .map_err(|e| CliError::Io(format!("{}: {e}", mat_path.display())))?;
        let m = material::parse_material_toml(&text)?;
        Ok(HingeSpec::new(h.profile().clone(), h.width(), m, h.sheet_thickness())?)
    }
}

fn material_cmd(ctx: &Ctx, c: MaterialCmd) -> Result<(), CliError> {
    let MaterialCmd::Fit { csv, eps_max, out } = c;
    let samples = material::load_samples_csv(&csv)?;
    let fit = material::fit_bilinear_with_limit(&samples, eps_max)?;
    println!("{}", fit.material);
    println!("residual rms: {:.4e} Pa over {} samples", fit.residual_rms, samples.len());
    if let Some(out) = out {
        let p = ctx.write(&out, material::material_to_toml(&fit.material).as_bytes())?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn solver_opts(i: &HingeInput) -> SolverOptions {
    SolverOptions {
        stations: i.stations,
        fibers: i.fibers,
    }
}

fn hinge_cmd(ctx: &Ctx, c: HingeCmd) -> Result<(), CliError> {
    match c {
        HingeCmd::Torque { input, theta_deg } => {
            let h = ctx.hinge(input.spec.as_deref(), input.material.as_deref())?;
            let r = mechanics::torque(&h, theta_deg.to_radians(), solver_opts(&input))?;
            println!("theta: {theta_deg} deg");
            println!("torque: {:.6e} N·m ({:.4} N·um)", r.torque, r.torque * 1e6);
            println!("energy: {:.6e} J", r.energy);
            println!("eps_peak: {:.6}", r.eps_peak);
            println!("over_limit: {}", r.over_limit);
        }
        HingeCmd::Sweep {
            input,
            theta_max_deg,
            n,
            out,
            plot,
        } => {
            let h = ctx.hinge(input.spec.as_deref(), input.material.as_deref())?;
            let curve = mechanics::torque_curve(&h, theta_max_deg.to_radians(), n, solver_opts(&input))?;
            let mut buf = Vec::new();
            mechanics::write_curve_csv(&curve, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            let p = ctx.write(&out, &buf)?;
            let peak = curve.samples.last().expect("n >= 2");
            println!(
                "{} points to {theta_max_deg} deg; torque at end {:.4} N·um, eps_peak {:.5}{}",
                curve.samples.len(),
                peak.torque * 1e6,
                peak.eps_peak,
                if peak.over_limit { " (over limit)" } else { "" }
            );
            println!("wrote {}", p.display());
            if let Some(stem) = plot {
                let series = [PlotSeries::from_curve("model", &curve)];
                write_plot(ctx, &series, &stem)?;
            }
        }
        HingeCmd::Limit {
            input,
            eps,
            theta_deg,
            length_um,
        } => {
            if let (Some(theta), Some(l)) = (theta_deg, length_um) {
                let eps = eps.unwrap_or(material::DEFAULT_EPS_MAX);
                let t = mechanics::max_thickness_for(theta.to_radians(), l * 1e-6, eps)?;
                println!("max thickness: {:.3} um (theta {theta} deg, L {l} um, eps {eps})", t * 1e6);
                return Ok(());
            }
            let h = ctx.hinge(input.spec.as_deref(), input.material.as_deref())?;
            let eps = eps.unwrap_or(h.material().eps_max());
            let th = mechanics::elastic_limit(&h, eps, solver_opts(&input))?;
            println!("elastic limit: {:.4} deg at eps {eps}", th.to_degrees());
        }
    }
    Ok(())
}

fn laser_cmd(ctx: &Ctx, c: LaserCmd) -> Result<(), CliError> {
    match c {
        LaserCmd::Fit {
            csv,
            target_um,
            max_passes,
            out,
        } => {
            let samples = lasercal::read_etch_csv(read_file(&csv)?)?;
            let fits = lasercal::fit_etch_rates(&samples)?;
            for f in &fits {
                println!("{f}");
            }
            if let Some(out) = out {
                let mut buf = Vec::new();
                lasercal::write_fit_csv(&fits, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                println!("wrote {}", ctx.write(&out, &buf)?.display());
            }
            if let Some(target) = target_um {
                let cfg = LaserConfig {
                    max_passes,
                    ..LaserConfig::default()
                };
                let s = lasercal::select_setting(&fits, target, &cfg)?;
                println!("selected: {s}");
            }
        }
        LaserCmd::Grid {
            rates,
            passes,
            side_um,
            pitch_um,
            gap_um,
            out,
            dxf,
        } => {
            let g = lasercal::calibration_grid(&rates, passes, side_um, ctx.pitch(pitch_um), gap_um)?;
            let p = ctx.write(&out, g.toolpath.to_text().as_bytes())?;
            println!(
                "{} cells, {} lines each, {:.3} mm of path",
                g.cells.len(),
                g.cells[0].lines,
                g.toolpath.total_length()
            );
            println!("wrote {}", p.display());
            if let Some(d) = dxf {
                println!("wrote {}", ctx.write(&d, g.toolpath.to_dxf().as_bytes())?.display());
            }
        }
    }
    Ok(())
}

fn plan_cmd(ctx: &Ctx, c: PlanCmd) -> Result<(), CliError> {
    match c {
        PlanCmd::Depthmap {
            spec,
            pitch_um,
            sides,
            margin,
            out,
        } => {
            let h = ctx.hinge(spec.as_deref(), None)?;
            let dm = planner::profile_to_depthmap(&h, ctx.pitch(pitch_um), sides, margin)?;
            let mut buf = Vec::new();
            dm.write_text(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            println!(
                "{} x {} cells at {} um, max depth {:.3} um",
                dm.nx(),
                dm.ny(),
                dm.pitch_um(),
                dm.max_depth()
            );
            println!("wrote {}", ctx.write(&out, &buf)?.display());
        }
        PlanCmd::Slice {
            depthmap,
            depth_per_layer,
            passes,
            rep_rate_khz,
            out,
        } => {
            let dm = DepthMap::read_text(read_file(&depthmap)?)?;
            let base = ctx.cfg.laser;
            let delta = depth_per_layer
                .or(base.map(|b| b.depth_per_layer_um))
                .ok_or_else(|| CliError::Missing("--depth-per-layer (or [laser] in the project file)".into()))?;
            let setting = AblationSetting::manual(
                delta,
                passes.or(base.map(|b| b.passes_per_layer)).unwrap_or(5),
                rep_rate_khz.or(base.map(|b| b.rep_rate_khz)).unwrap_or(200.0),
            )?;
            let plan = planner::slice(&dm, &setting)?;
            println!("{} layers ({setting})", plan.layers.len());
            if let Some(out) = out {
                let mut buf = Vec::new();
                plan.write_text(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                println!("wrote {}", ctx.write(&out, &buf)?.display());
            }
        }
        PlanCmd::Raster {
            plan,
            angle,
            no_serpentine,
            out,
            dxf,
        } => {
            let plan = LayerPlan::read_text(read_file(&plan)?)?;
            let tp: Toolpath = planner::plan_toolpath(&plan, angle, !no_serpentine)?;
            println!(
                "{} layers, {} segments, {:.3} mm of path",
                plan.layers.len(),
                tp.len(),
                tp.total_length()
            );
            println!("wrote {}", ctx.write(&out, tp.to_text().as_bytes())?.display());
            if let Some(d) = dxf {
                println!("wrote {}", ctx.write(&d, tp.to_dxf().as_bytes())?.display());
            }
        }
        PlanCmd::Verify {
            plan,
            depthmap,
            tolerance_um,
        } => {
            let plan = LayerPlan::read_text(read_file(&plan)?)?;
            let dm = DepthMap::read_text(read_file(&depthmap)?)?;
            let tol = tolerance_um.unwrap_or(0.5 * plan.setting.depth_per_layer_um);
            let r = planner::verify_plan(&plan, &dm, tol)?;
            println!("{r}");
        }
        PlanCmd::Tolerance {
            designed,
            measured,
            band_um,
            row,
            out,
        } => {
            let d = DepthMap::read_text(read_file(&designed)?)?;
            let m = DepthMap::read_text(read_file(&measured)?)?;
            let r = planner::tolerance_report(&d, &m, band_um, row.unwrap_or(d.ny() / 2))?;
            println!("{r}");
            if let Some(out) = out {
                let mut buf = Vec::new();
                planner::write_section_csv(&r, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                println!("wrote {}", ctx.write(&out, &buf)?.display());
            }
        }
    }
    Ok(())
}

fn write_plot(ctx: &Ctx, series: &[PlotSeries], stem: &Path) -> Result<(), CliError> {
    let svg = bench::render_svg(series)?;
    let csv = bench::render_plot_csv(series)?;
    println!("wrote {}", ctx.write(&stem.with_extension("svg"), svg.as_bytes())?.display());
    println!("wrote {}", ctx.write(&stem.with_extension("plot.csv"), csv.as_bytes())?.display());
    Ok(())
}

fn bench_cmd(ctx: &Ctx, c: BenchCmd) -> Result<(), CliError> {
    match c {
        BenchCmd::Aggregate {
            dir,
            arm_m,
            grid_step_deg,
            order,
            out,
            plot,
        } => {
            let trials = bench::load_trial_dir(&dir, arm_m)?;
            let agg = bench::aggregate_with(&trials, grid_step_deg.to_radians(), order)?;
            let max_std = agg.std.iter().copied().fold(0.0, f64::max);
            println!(
                "{} trials, {} grid points, max std {:.4} N·um",
                agg.n_trials,
                agg.grid.len(),
                max_std * 1e6
            );
            let mut buf = Vec::new();
            bench::write_aggregate_csv(&agg, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {}", ctx.write(&out, &buf)?.display());
            if let Some(stem) = plot {
                let label = trials[0].hinge_id.clone();
                write_plot(ctx, &[PlotSeries::from_aggregate(label, &agg)], &stem)?;
            }
        }
        BenchCmd::Compare {
            model,
            aggregate,
            out,
            plot,
        } => {
            let curve = mechanics::read_curve_csv(read_file(&model)?)?;
            let agg = bench::read_aggregate_csv(read_file(&aggregate)?)?;
            let r = bench::compare(&curve, &agg)?;
            println!("rmse: {:.4} N·um", r.rmse_nm * 1e6);
            println!("max abs error: {:.4} N·um", r.max_abs_error_nm * 1e6);
            println!("nrmse: {:.2}% of peak", r.nrmse_pct);
            println!("within mean ± 2 std: {:.3} over {} points", r.within_band_fraction, r.n_points);
            if let Some(out) = out {
                let mut buf = Vec::new();
                bench::write_compare_csv(&r, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                println!("wrote {}", ctx.write(&out, &buf)?.display());
            }
            if let Some(stem) = plot {
                let series = [
                    PlotSeries::from_aggregate("experiment", &agg),
                    PlotSeries::from_curve("model", &curve),
                ];
                write_plot(ctx, &series, &stem)?;
            }
        }
    }
    Ok(())
}
