//! Torque-bench data pipeline: median filtering, trial aggregation and
//! comparison against model curves.
//!
//! Torques are N·m internally; plots and their CSV use N·um.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mechanics::TorqueCurve;

/// Median filter window used on raw trials.
pub const DEFAULT_FILTER_ORDER: usize = 101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("trial ranges do not overlap")]
    EmptyOverlap,
    #[error("trial {trial} has {points} points; filtering with order {order} needs at least {needed}")]
    InsufficientPoints {
        trial: usize,
        points: usize,
        order: usize,
        needed: usize,
    },
    #[error("malformed trial data: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl BenchError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "Domain",
            Self::EmptyOverlap => "EmptyOverlap",
            Self::InsufficientPoints { .. } => "InsufficientPoints",
            Self::Parse(_) => "Parse",
            Self::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Median of each sample's window of `order` neighbors. Near the ends the
/// window shrinks symmetrically to the widest odd window that fits.
pub fn median_filter(series: &[f64], order: usize) -> Result<Vec<f64>, BenchError> {
    if order == 0 || order.is_multiple_of(2) {
        return Err(BenchError::Domain(format!("median filter order must be odd and positive, got {order}")));
    }
    let n = series.len();
    let half = order / 2;
    let mut buf = Vec::with_capacity(order);
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            buf.clear();
            buf.extend_from_slice(&series[i - h..=i + h]);
            let (_, m, _) = buf.select_nth_unstable_by(h, f64::total_cmp);
            *m
        })
        .collect())
}

/// One torque-angle recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueTrial {
    pub hinge_id: String,
    pub trial: usize,
    /// `(theta rad, torque N·m)`, theta nondecreasing.
    pub points: Vec<(f64, f64)>,
}

impl TorqueTrial {
    pub fn new(hinge_id: impl Into<String>, trial: usize, points: Vec<(f64, f64)>) -> Result<Self, BenchError> {
        if points.is_empty() {
            return Err(BenchError::Domain("trial has no points".into()));
        }
        if points.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(BenchError::Domain("trial contains non-finite values".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 < w[0].0) {
            return Err(BenchError::Domain(format!(
                "theta decreases from {} to {} rad",
                w[0].0, w[1].0
            )));
        }
        Ok(Self {
            hinge_id: hinge_id.into(),
            trial,
            points,
        })
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Torque column median-filtered, angles untouched.
    pub fn filtered(&self, order: usize) -> Result<Self, BenchError> {
        let torque: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        let f = median_filter(&torque, order)?;
        Ok(Self {
            hinge_id: self.hinge_id.clone(),
            trial: self.trial,
            points: self.points.iter().zip(f).map(|(p, t)| (p.0, t)).collect(),
        })
    }
}

/// Linear interpolation on nondecreasing abscissae; `None` outside.
fn interp(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let (first, last) = (points.first()?, points.last()?);
    if x < first.0 || x > last.0 {
        return None;
    }
    let i = points.partition_point(|p| p.0 < x);
    let b = points[i];
    if b.0 == x || i == 0 {
        return Some(b.1);
    }
    let a = points[i - 1];
    Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
}

/// Mean and sample standard deviation across trials on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_trials: usize,
}

pub fn aggregate(trials: &[TorqueTrial], grid_step: f64) -> Result<AggregateCurve, BenchError> {
    aggregate_with(trials, grid_step, DEFAULT_FILTER_ORDER)
}

/// Filters each trial, resamples onto the grid spanning the common angle
/// range, and reduces across trials.
pub fn aggregate_with(trials: &[TorqueTrial], grid_step: f64, order: usize) -> Result<AggregateCurve, BenchError> {
    if trials.len() < 2 {
        return Err(BenchError::Domain(format!("need at least 2 trials, got {}", trials.len())));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(BenchError::Domain(format!("grid step must be positive, got {grid_step}")));
    }
    let needed = order + 2;
    for t in trials {
        if t.points.len() < needed {
            return Err(BenchError::InsufficientPoints {
                trial: t.trial,
                points: t.points.len(),
                order,
                needed,
            });
        }
    }
    let lo = trials.iter().map(|t| t.theta_range().0).fold(f64::NEG_INFINITY, f64::max);
    let hi = trials.iter().map(|t| t.theta_range().1).fold(f64::INFINITY, f64::min);
    if lo > hi {
        return Err(BenchError::EmptyOverlap);
    }
    let n_grid = ((hi - lo) / grid_step * (1.0 + 1e-12)).floor() as usize + 1;
    let grid: Vec<f64> = (0..n_grid).map(|k| lo + k as f64 * grid_step).map(|x| x.min(hi)).collect();
    let filtered = trials.iter().map(|t| t.filtered(order)).collect::<Result<Vec<_>, _>>()?;

    let mut mean = vec![0.0; n_grid];
    let mut m2 = vec![0.0; n_grid];
    for (k, t) in filtered.iter().enumerate() {
        let count = (k + 1) as f64;
        for (g, &x) in grid.iter().enumerate() {
            let v = interp(&t.points, x).expect("grid inside every trial");
            let d = v - mean[g];
            mean[g] += d / count;
            m2[g] += d * (v - mean[g]);
        }
    }
    let denom = (trials.len() - 1) as f64;
    let std = m2.iter().map(|s| (s.max(0.0) / denom).sqrt()).collect();
    Ok(AggregateCurve {
        grid,
        mean,
        std,
        n_trials: trials.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub rmse_nm: f64,
    pub max_abs_error_nm: f64,
    /// RMSE as a percentage of the peak experimental mean torque.
    pub nrmse_pct: f64,
    /// Fraction of compared points with the model inside mean ± 2 std.
    pub within_band_fraction: f64,
    /// Grid points inside the model's angle range.
    pub n_points: usize,
}

/// Scores a model curve against an aggregate on the aggregate's grid.
/// Grid points outside the model's range are skipped.
pub fn compare(model: &TorqueCurve, experiment: &AggregateCurve) -> Result<CompareReport, BenchError> {
    let pts: Vec<(f64, f64)> = model.samples.iter().map(|p| (p.theta, p.torque)).collect();
    if pts.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(BenchError::Domain("model angles must be nondecreasing".into()));
    }
    let (mut ss, mut max, mut within, mut n) = (0.0, 0.0f64, 0usize, 0usize);
    for ((&x, &m), &s) in experiment.grid.iter().zip(&experiment.mean).zip(&experiment.std) {
        let Some(v) = interp(&pts, x) else { continue };
        let e = (v - m).abs();
        ss += e * e;
        max = max.max(e);
        within += usize::from(e <= 2.0 * s);
        n += 1;
    }
    if n == 0 {
        return Err(BenchError::Domain("model and experiment angle ranges do not overlap".into()));
    }
    let rmse = (ss / n as f64).sqrt();
    let peak = experiment.mean.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok(CompareReport {
        rmse_nm: rmse,
        max_abs_error_nm: max,
        nrmse_pct: if peak > 0.0 { 100.0 * rmse / peak } else { 0.0 },
        within_band_fraction: within as f64 / n as f64,
        n_points: n,
    })
}

pub fn write_compare_csv<W: Write>(r: &CompareReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "rmse_nm,max_abs_error_nm,nrmse_pct,within_band_fraction,n_points")?;
    writeln!(
        out,
        "{:e},{:e},{:e},{},{}",
        r.rmse_nm, r.max_abs_error_nm, r.nrmse_pct, r.within_band_fraction, r.n_points
    )
}

pub fn write_aggregate_csv<W: Write>(a: &AggregateCurve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta_rad,mean_nm,std_nm,n_trials")?;
    for ((x, m), s) in a.grid.iter().zip(&a.mean).zip(&a.std) {
        writeln!(out, "{x:e},{m:e},{s:e},{}", a.n_trials)?;
    }
    Ok(())
}

pub fn read_aggregate_csv<R: Read>(reader: R) -> Result<AggregateCurve, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let h = rdr.headers().map_err(|e| BenchError::Parse(e.to_string()))?;
    if h.iter().collect::<Vec<_>>() != ["theta_rad", "mean_nm", "std_nm", "n_trials"] {
        return Err(BenchError::Parse("expected header `theta_rad,mean_nm,std_nm,n_trials`".into()));
    }
    let mut a = AggregateCurve {
        grid: vec![],
        mean: vec![],
        std: vec![],
        n_trials: 0,
    };
    for r in rdr.deserialize::<(f64, f64, f64, usize)>() {
        let (x, m, s, n) = r.map_err(|e| BenchError::Parse(e.to_string()))?;
        a.grid.push(x);
        a.mean.push(m);
        a.std.push(s);
        a.n_trials = n;
    }
    Ok(a)
}

/// Reads `theta_rad,torque_nm`, or `theta_rad,force_n` scaled by the
/// moment arm `arm_m`.
pub fn read_trial_csv<R: Read>(
    reader: R,
    hinge_id: &str,
    trial: usize,
    arm_m: Option<f64>,
) -> Result<TorqueTrial, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let h = rdr.headers().map_err(|e| BenchError::Parse(e.to_string()))?;
    let cols: Vec<&str> = h.iter().collect();
    let scale = match (cols.as_slice(), arm_m) {
        (["theta_rad", "torque_nm"], None) => 1.0,
        (["theta_rad", "force_n"], Some(arm)) if arm > 0.0 && arm.is_finite() => arm,
        (["theta_rad", "force_n"], _) => {
            return Err(BenchError::Parse("force data needs a positive moment arm".into()))
        }
        (["theta_rad", "torque_nm"], Some(_)) => {
            return Err(BenchError::Parse("moment arm given but the file already holds torque".into()))
        }
        _ => {
            return Err(BenchError::Parse(
                "expected header `theta_rad,torque_nm` or `theta_rad,force_n`".into(),
            ))
        }
    };
    let points = rdr
        .deserialize::<(f64, f64)>()
        .map(|r| r.map(|(a, v)| (a, v * scale)).map_err(|e| BenchError::Parse(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    TorqueTrial::new(hinge_id, trial, points)
}

/// Loads every `*.csv` in a hinge directory, in file-name order. The hinge
/// id is the directory name.
pub fn load_trial_dir(dir: &Path, arm_m: Option<f64>) -> Result<Vec<TorqueTrial>, BenchError> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let f = std::fs::File::open(p).map_err(|e| BenchError::Io(format!("{}: {e}", p.display())))?;
            read_trial_csv(f, &id, k, arm_m).map_err(|e| match e {
                BenchError::Parse(m) => BenchError::Parse(format!("{}: {m}", p.display())),
                e => e,
            })
        })
        .collect()
}

/// A labeled curve for plotting, torque in N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub theta_rad: Vec<f64>,
    pub torque_nm: Vec<f64>,
    /// Present for aggregates; drawn as a ±1 std band.
    pub std_nm: Option<Vec<f64>>,
}

impl PlotSeries {
    pub fn from_curve(label: impl Into<String>, c: &TorqueCurve) -> Self {
        Self {
            label: label.into(),
            theta_rad: c.thetas().collect(),
            torque_nm: c.torques().collect(),
            std_nm: None,
        }
    }

    pub fn from_aggregate(label: impl Into<String>, a: &AggregateCurve) -> Self {
        Self {
            label: label.into(),
            theta_rad: a.grid.clone(),
            torque_nm: a.mean.clone(),
            std_nm: Some(a.std.clone()),
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// SVG with angle in degrees and torque in N·um.
pub fn render_svg(series: &[PlotSeries]) -> Result<String, BenchError> {
    check_series(series)?;
    let (w, h, m) = (640.0, 420.0, 50.0);
    let deg = |r: f64| r.to_degrees();
    let num = |t: f64| t * 1e6;
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = 0.0f64;
    let mut y1 = f64::NEG_INFINITY;
    for s in series {
        for (k, (&a, &t)) in s.theta_rad.iter().zip(&s.torque_nm).enumerate() {
            let sd = s.std_nm.as_ref().map_or(0.0, |v| v[k]);
            x0 = x0.min(deg(a));
            x1 = x1.max(deg(a));
            y0 = y0.min(num(t - sd));
            y1 = y1.max(num(t + sd));
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |a: f64| m + (deg(a) - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |t: f64| h - m - (num(t) - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">angle (deg) {x0:.1} to {x1:.1}</text>"#,
        w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">torque (N·um) {y0:.1} to {y1:.1}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some(sd) = &s.std_nm {
            let upper = s.theta_rad.iter().zip(&s.torque_nm).zip(sd).map(|((a, t), d)| (px(*a), py(t + d)));
            let lower = s.theta_rad.iter().zip(&s.torque_nm).zip(sd).rev().map(|((a, t), d)| (px(*a), py(t - d)));
            let pts: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s
            .theta_rad
            .iter()
            .zip(&s.torque_nm)
            .map(|(a, t)| format!("{:.2},{:.2}", px(*a), py(*t)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            m + 10.0,
            m + 18.0 * (k + 1) as f64,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn check_series(series: &[PlotSeries]) -> Result<(), BenchError> {
    if series.is_empty() {
        return Err(BenchError::Domain("nothing to plot".into()));
    }
    for s in series {
        let n = s.theta_rad.len();
        if n == 0 || s.torque_nm.len() != n || s.std_nm.as_ref().is_some_and(|v| v.len() != n) {
            return Err(BenchError::Domain(format!("series `{}` has mismatched or empty columns", s.label)));
        }
    }
    Ok(())
}

/// Companion CSV `series,theta_deg,torque_num,std_num`, one row per point.
pub fn render_plot_csv(series: &[PlotSeries]) -> Result<String, BenchError> {
    check_series(series)?;
    let mut out = String::from("series,theta_deg,torque_num,std_num\n");
    for s in series {
        let label = s.label.replace(',', ";");
        for (k, (a, t)) in s.theta_rad.iter().zip(&s.torque_nm).enumerate() {
            let sd = s.std_nm.as_ref().map(|v| format!("{:e}", v[k] * 1e6)).unwrap_or_default();
            let _ = writeln!(out, "{label},{:e},{:e},{sd}", a.to_degrees(), t * 1e6);
        }
    }
    Ok(out)
}

/// Writes `<stem>.svg` and `<stem>.plot.csv`.
pub fn emit_plot(series: &[PlotSeries], stem: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
    let svg = render_svg(series)?;
    let csv = render_plot_csv(series)?;
    let svg_path = stem.with_extension("svg");
    let csv_path = stem.with_extension("plot.csv");
    std::fs::write(&svg_path, svg).map_err(|e| BenchError::Io(format!("{}: {e}", svg_path.display())))?;
    std::fs::write(&csv_path, csv).map_err(|e| BenchError::Io(format!("{}: {e}", csv_path.display())))?;
    Ok((svg_path, csv_path))
}
