//! Etch-rate calibration for femtosecond raster ablation.
//!
//! A characterization array of squares is rastered at several repetition
//! rates (the power knob) and pass counts. Confocal depth measurements are
//! fitted per repetition rate with an ordinary least-squares line, and the
//! fitted rates drive the choice of machining setting.

use std::fmt;
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::toolpath::{Polyline, Toolpath, ToolpathError};

/// Spot diameter with standard optics, um.
pub const DEFAULT_SPOT_DIAMETER_UM: f64 = 8.0;
/// Galvo field of view, mm (square).
pub const DEFAULT_FIELD_OF_VIEW_MM: f64 = 45.0;
/// Raster line spacing used for fills, um.
pub const DEFAULT_PITCH_UM: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaserError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data for {rep_rate_khz} kHz: {message}")]
    InsufficientData { rep_rate_khz: f64, message: String },
    #[error("degenerate regressor for {rep_rate_khz} kHz: all samples share one pass count")]
    DegenerateRegressor { rep_rate_khz: f64 },
    #[error("no feasible setting: {0}")]
    NoFeasibleSetting(String),
    #[error("malformed etch data: {0}")]
    Parse(String),
    #[error(transparent)]
    Toolpath(#[from] ToolpathError),
}

impl LaserError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "Domain",
            Self::InsufficientData { .. } => "InsufficientData",
            Self::DegenerateRegressor { .. } => "DegenerateRegressor",
            Self::NoFeasibleSetting(_) => "NoFeasibleSetting",
            Self::Parse(_) => "Parse",
            Self::Toolpath(e) => e.kind(),
        }
    }
}

/// One confocal depth measurement of a characterization square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtchSample {
    pub rep_rate_khz: f64,
    pub passes: u32,
    pub depth_um: f64,
}

/// Least-squares line `depth = intercept + rate * passes` for one rep rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtchFit {
    pub rep_rate_khz: f64,
    /// Etch rate, um per pass.
    pub rate_um_per_pass: f64,
    pub intercept_um: f64,
    /// Half-width of the 95% confidence interval on the rate.
    pub rate_ci95: f64,
    pub r2: f64,
    pub n: usize,
}

impl EtchFit {
    /// Only fits that actually remove material can be used for planning.
    pub fn is_accepted(&self) -> bool {
        self.rate_um_per_pass > 0.0
    }
}

impl fmt::Display for EtchFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>7.1} kHz  rate {:.3} ± {:.3} um/pass  intercept {:.3} um  r² {:.4}  n {}",
            self.rep_rate_khz, self.rate_um_per_pass, self.rate_ci95, self.intercept_um, self.r2, self.n
        )
    }
}

/// Fits one line per repetition rate; results are sorted by rate.
pub fn fit_etch_rates(samples: &[EtchSample]) -> Result<Vec<EtchFit>, LaserError> {
    for s in samples {
        if !(s.rep_rate_khz > 0.0 && s.rep_rate_khz.is_finite()) {
            return Err(LaserError::Parse(format!("invalid repetition rate {}", s.rep_rate_khz)));
        }
        if s.passes == 0 {
            return Err(LaserError::Parse("pass counts start at 1".into()));
        }
        if !(s.depth_um >= 0.0 && s.depth_um.is_finite()) {
            return Err(LaserError::Parse(format!("invalid depth {}", s.depth_um)));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.rep_rate_khz.total_cmp(&b.rep_rate_khz).then(a.passes.cmp(&b.passes)));
    sorted
        .chunk_by(|a, b| a.rep_rate_khz == b.rep_rate_khz)
        .map(fit_group)
        .collect()
}

fn fit_group(group: &[EtchSample]) -> Result<EtchFit, LaserError> {
    let rate = group[0].rep_rate_khz;
    let mut distinct: Vec<u32> = group.iter().map(|s| s.passes).collect();
    distinct.dedup();
    if distinct.len() == 1 && group.len() >= 3 {
        return Err(LaserError::DegenerateRegressor { rep_rate_khz: rate });
    }
    if distinct.len() < 3 {
        return Err(LaserError::InsufficientData {
            rep_rate_khz: rate,
            message: format!("need at least 3 distinct pass counts, found {}", distinct.len()),
        });
    }
    let n = group.len();
    let nf = n as f64;
    let mx = group.iter().map(|s| s.passes as f64).sum::<f64>() / nf;
    let my = group.iter().map(|s| s.depth_um).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in group {
        let dx = s.passes as f64 - mx;
        let dy = s.depth_um - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(LaserError::DegenerateRegressor { rep_rate_khz: rate });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = group
        .iter()
        .map(|s| (s.depth_um - intercept - slope * s.passes as f64).powi(2))
        .sum();
    let dof = nf - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| LaserError::Domain(e.to_string()))?
        .inverse_cdf(0.975);
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(EtchFit {
        rep_rate_khz: rate,
        rate_um_per_pass: slope,
        intercept_um: intercept,
        rate_ci95: t * se,
        r2,
        n,
    })
}

/// Fixed machine parameters that the calibration itself does not measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserConfig {
    pub spot_diameter_um: f64,
    pub field_of_view_mm: f64,
    /// Largest pass count considered per layer (the calibrated range).
    pub max_passes: u32,
    /// Known pulse energies per repetition rate, `(kHz, uJ)`.
    pub pulse_energy_uj: Vec<(f64, f64)>,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            spot_diameter_um: DEFAULT_SPOT_DIAMETER_UM,
            field_of_view_mm: DEFAULT_FIELD_OF_VIEW_MM,
            max_passes: 14,
            // 4.1 J/cm² over an 8 um flat-top spot
            pulse_energy_uj: vec![(200.0, 2.06)],
        }
    }
}

impl LaserConfig {
    pub fn fluence_at(&self, rep_rate_khz: f64) -> Option<f64> {
        self.pulse_energy_uj
            .iter()
            .find(|(r, _)| *r == rep_rate_khz)
            .and_then(|&(_, e)| fluence(e, self.spot_diameter_um).ok())
    }
}

/// A machining recipe for one ablation layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationSetting {
    pub rep_rate_khz: f64,
    /// Flat-top fluence, J/cm², when the pulse energy is known.
    pub fluence_j_cm2: Option<f64>,
    pub passes_per_layer: u32,
    pub depth_per_layer_um: f64,
}

impl AblationSetting {
    /// A setting given directly rather than selected from fits.
    pub fn manual(depth_per_layer_um: f64, passes_per_layer: u32, rep_rate_khz: f64) -> Result<Self, LaserError> {
        if !(depth_per_layer_um > 0.0 && depth_per_layer_um.is_finite()) {
            return Err(LaserError::Domain(format!("depth per layer must be positive, got {depth_per_layer_um}")));
        }
        if passes_per_layer == 0 {
            return Err(LaserError::Domain("passes per layer must be at least 1".into()));
        }
        if !(rep_rate_khz > 0.0 && rep_rate_khz.is_finite()) {
            return Err(LaserError::Domain(format!("repetition rate must be positive, got {rep_rate_khz}")));
        }
        Ok(Self {
            rep_rate_khz,
            fluence_j_cm2: None,
            passes_per_layer,
            depth_per_layer_um,
        })
    }
}

impl fmt::Display for AblationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} kHz, {} passes, {:.3} um/layer",
            self.rep_rate_khz, self.passes_per_layer, self.depth_per_layer_um
        )?;
        if let Some(fl) = self.fluence_j_cm2 {
            write!(f, ", {fl:.2} J/cm²")?;
        }
        Ok(())
    }
}

/// Largest CI-propagated depth error accepted, as a fraction of the target.
pub const CI_FEASIBILITY_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    fit: EtchFit,
    passes: u32,
    err: f64,
}

/// Picks the `(rep rate, passes)` pair whose predicted depth `rate * passes`
/// is closest to the target.
///
/// Ties go to fewer passes, then to the lower repetition rate. Pairs whose
/// rate uncertainty, multiplied out over the passes, exceeds 20% of the
/// target are rejected.
pub fn select_setting(
    fits: &[EtchFit],
    target_depth_per_layer_um: f64,
    config: &LaserConfig,
) -> Result<AblationSetting, LaserError> {
    if !(target_depth_per_layer_um > 0.0 && target_depth_per_layer_um.is_finite()) {
        return Err(LaserError::Domain(format!("target depth must be positive, got {target_depth_per_layer_um}")));
    }
    let accepted: Vec<&EtchFit> = fits.iter().filter(|f| f.is_accepted()).collect();
    if accepted.is_empty() {
        return Err(LaserError::NoFeasibleSetting("no fit with a positive etch rate".into()));
    }
    let target = target_depth_per_layer_um;
    let tie = 1e-12 * target;
    let better = |a: &Candidate, b: &Candidate| {
        if (a.err - b.err).abs() > tie {
            a.err < b.err
        } else if a.passes != b.passes {
            a.passes < b.passes
        } else {
            a.fit.rep_rate_khz < b.fit.rep_rate_khz
        }
    };
    let mut best: Option<Candidate> = None;
    let mut best_any: Option<Candidate> = None;
    for fit in accepted {
        for passes in 1..=config.max_passes.max(1) {
            let c = Candidate {
                fit: *fit,
                passes,
                err: (fit.rate_um_per_pass * passes as f64 - target).abs(),
            };
            if best_any.as_ref().is_none_or(|b| better(&c, b)) {
                best_any = Some(c);
            }
            let ci_err = fit.rate_ci95 * passes as f64;
            if ci_err > CI_FEASIBILITY_FRACTION * target {
                continue;
            }
            if best.as_ref().is_none_or(|b| better(&c, b)) {
                best = Some(c);
            }
        }
    }
    let Some(c) = best else {
        let b = best_any.expect("at least one candidate");
        return Err(LaserError::NoFeasibleSetting(format!(
            "best candidate {} kHz x {} passes predicts {:.3} um but its 95% band is ±{:.3} um (limit {:.3} um)",
            b.fit.rep_rate_khz,
            b.passes,
            b.fit.rate_um_per_pass * b.passes as f64,
            b.fit.rate_ci95 * b.passes as f64,
            CI_FEASIBILITY_FRACTION * target
        )));
    };
    Ok(AblationSetting {
        rep_rate_khz: c.fit.rep_rate_khz,
        fluence_j_cm2: config.fluence_at(c.fit.rep_rate_khz),
        passes_per_layer: c.passes,
        depth_per_layer_um: c.fit.rate_um_per_pass * c.passes as f64,
    })
}

/// Flat-top fluence `E / (pi (d/2)^2)` in J/cm² from pulse energy (uJ) and
/// spot diameter (um).
///
/// A Gaussian beam's peak fluence is twice this value.
pub fn fluence(pulse_energy_uj: f64, spot_diameter_um: f64) -> Result<f64, LaserError> {
    if !(pulse_energy_uj > 0.0 && pulse_energy_uj.is_finite()) || !(spot_diameter_um > 0.0 && spot_diameter_um.is_finite())
    {
        return Err(LaserError::Domain(format!(
            "pulse energy and spot diameter must be positive (E = {pulse_energy_uj} uJ, d = {spot_diameter_um} um)"
        )));
    }
    let radius_cm = 0.5 * spot_diameter_um * 1e-4;
    Ok(pulse_energy_uj * 1e-6 / (std::f64::consts::PI * radius_cm * radius_cm))
}

/// One square of the characterization array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationCell {
    pub row: usize,
    pub col: usize,
    pub rep_rate_khz: f64,
    pub passes: u32,
    /// Lower-left corner, mm.
    pub origin_mm: [f64; 2],
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub cells: Vec<CalibrationCell>,
    /// One serpentine polyline per cell; `layer` is the 1-based row
    /// (repetition-rate) index and `passes` the cell's pass count.
    pub toolpath: Toolpath,
}

/// Characterization array: rows are repetition rates, columns pass counts.
///
/// Each square is filled with `floor(side / pitch) + 1` parallel cuts joined
/// into a serpentine. Squares are separated by `gap_um`.
pub fn calibration_grid(
    rates_khz: &[f64],
    passes: RangeInclusive<u32>,
    square_side_um: f64,
    pitch_um: f64,
    gap_um: f64,
) -> Result<CalibrationGrid, LaserError> {
    if !(pitch_um > 0.0 && pitch_um.is_finite()) {
        return Err(LaserError::Domain(format!("pitch must be positive, got {pitch_um}")));
    }
    if !(square_side_um >= 2.0 * pitch_um && square_side_um.is_finite()) {
        return Err(LaserError::Domain(format!(
            "square side {square_side_um} um must be at least two pitches ({pitch_um} um)"
        )));
    }
    if !(gap_um >= 0.0 && gap_um.is_finite()) {
        return Err(LaserError::Domain(format!("gap must be nonnegative, got {gap_um}")));
    }
    if rates_khz.is_empty() || passes.is_empty() || *passes.start() == 0 {
        return Err(LaserError::Domain("need at least one rate and a pass range starting at 1 or more".into()));
    }
    let lines = (square_side_um / pitch_um + 1e-9).floor() as usize + 1;
    let cell_pitch_mm = (square_side_um + gap_um) * 1e-3;
    let side_mm = square_side_um * 1e-3;
    let mut cells = Vec::new();
    let mut toolpath = Toolpath::new();
    for (row, &rate) in rates_khz.iter().enumerate() {
        for (col, p) in passes.clone().enumerate() {
            let origin = [col as f64 * cell_pitch_mm, row as f64 * cell_pitch_mm];
            let mut pts = Vec::with_capacity(2 * lines);
            for k in 0..lines {
                let y = origin[1] + k as f64 * pitch_um * 1e-3;
                let (a, b) = if k % 2 == 0 { (0.0, side_mm) } else { (side_mm, 0.0) };
                pts.push([origin[0] + a, y]);
                pts.push([origin[0] + b, y]);
            }
            toolpath.push(Polyline::new(row + 1, p, pts)?);
            cells.push(CalibrationCell {
                row,
                col,
                rep_rate_khz: rate,
                passes: p,
                origin_mm: origin,
                lines,
            });
        }
    }
    Ok(CalibrationGrid { cells, toolpath })
}

/// Reads `rep_rate_khz,passes,depth_um` rows.
pub fn read_etch_csv<R: Read>(reader: R) -> Result<Vec<EtchSample>, LaserError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| LaserError::Parse(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["rep_rate_khz", "passes", "depth_um"] {
        return Err(LaserError::Parse("expected header `rep_rate_khz,passes,depth_um`".into()));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| LaserError::Parse(e.to_string())))
        .collect()
}

/// Fit report CSV, one row per repetition rate.
pub fn write_fit_csv<W: Write>(fits: &[EtchFit], mut out: W) -> std::io::Result<()> {
    writeln!(out, "rep_rate_khz,rate_um_per_pass,intercept_um,rate_ci95_um_per_pass,r2,n")?;
    for f in fits {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            f.rep_rate_khz, f.rate_um_per_pass, f.intercept_um, f.rate_ci95, f.r2, f.n
        )?;
    }
    Ok(())
}
