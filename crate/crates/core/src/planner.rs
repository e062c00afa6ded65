//! 2.5D fabrication planning: depth maps, layer slicing, raster fill and
//! tolerance checks.
//!
//! Grid cell `(i, j)` sits at `x = i * pitch`, `y = j * pitch`, with `i`
//! along the hinge length and `j` across its width. Depths are in um,
//! toolpaths in mm.

use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::lasercal::AblationSetting;
use crate::mechanics::{HingeSpec, Sides};
use crate::toolpath::{Polyline, Toolpath, ToolpathError};

/// Raster spacing used for fills, um.
pub const DEFAULT_PITCH_UM: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("grid mismatch: {0}")]
    Dimension(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Toolpath(#[from] ToolpathError),
}

impl PlannerError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "Domain",
            Self::InfeasibleProfile(_) => "InfeasibleProfile",
            Self::Dimension(_) => "Dimension",
            Self::Parse { .. } => "Parse",
            Self::Io(_) => "Io",
            Self::Toolpath(e) => e.kind(),
        }
    }
}

impl From<std::io::Error> for PlannerError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Target ablation depth on a uniform grid, row-major with rows along `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    nx: usize,
    ny: usize,
    pitch_um: f64,
    depths: Vec<f64>,
}

impl DepthMap {
    pub fn new(nx: usize, ny: usize, pitch_um: f64, depths: Vec<f64>) -> Result<Self, PlannerError> {
        if nx == 0 || ny == 0 {
            return Err(PlannerError::Domain("depth map must have at least one cell".into()));
        }
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(PlannerError::Domain(format!("pitch must be positive, got {pitch_um}")));
        }
        if depths.len() != nx * ny {
            return Err(PlannerError::Dimension(format!(
                "{} values for a {nx} x {ny} grid",
                depths.len()
            )));
        }
        if let Some(d) = depths.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(PlannerError::Domain(format!("depths must be finite and nonnegative, found {d}")));
        }
        Ok(Self { nx, ny, pitch_um, depths })
    }

    pub fn uniform(nx: usize, ny: usize, pitch_um: f64, depth_um: f64) -> Result<Self, PlannerError> {
        Self::new(nx, ny, pitch_um, vec![depth_um; nx * ny])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }
    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.depths[j * self.nx + i]
    }

    pub fn max_depth(&self) -> f64 {
        self.depths.iter().copied().fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &DepthMap) -> Result<(), PlannerError> {
        if self.nx != other.nx || self.ny != other.ny || self.pitch_um != other.pitch_um {
            return Err(PlannerError::Dimension(format!(
                "{} x {} at {} um vs {} x {} at {} um",
                self.nx, self.ny, self.pitch_um, other.nx, other.ny, other.pitch_um
            )));
        }
        Ok(())
    }

    /// Header `nx ny pitch_um`, then `ny` rows of `nx` depths.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.nx, self.ny, self.pitch_um)?;
        for row in self.depths.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|d| format!("{d:.4}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the text format; values may be separated by spaces, tabs or
    /// commas, and `#` starts a comment.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, PlannerError> {
        let mut header: Option<(usize, usize, f64)> = None;
        let mut depths = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .collect();
            let perr = |m: String| PlannerError::Parse { line: lineno, message: m };
            match header {
                None => {
                    if toks.len() != 3 {
                        return Err(perr("expected header `nx ny pitch_um`".into()));
                    }
                    let nx = toks[0].parse().map_err(|_| perr(format!("bad nx `{}`", toks[0])))?;
                    let ny = toks[1].parse().map_err(|_| perr(format!("bad ny `{}`", toks[1])))?;
                    let p = toks[2].parse().map_err(|_| perr(format!("bad pitch `{}`", toks[2])))?;
                    header = Some((nx, ny, p));
                }
                Some((nx, _, _)) => {
                    if toks.len() != nx {
                        return Err(perr(format!("expected {nx} values, found {}", toks.len())));
                    }
                    for t in toks {
                        depths.push(t.parse::<f64>().map_err(|_| perr(format!("bad depth `{t}`")))?);
                    }
                }
            }
        }
        let (nx, ny, p) = header.ok_or(PlannerError::Parse {
            line: 0,
            message: "empty depth map".into(),
        })?;
        Self::new(nx, ny, p, depths)
    }
}

/// Boolean grid with the same layout as a [`DepthMap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn new(nx: usize, ny: usize, cells: Vec<bool>) -> Result<Self, PlannerError> {
        if nx == 0 || ny == 0 || cells.len() != nx * ny {
            return Err(PlannerError::Dimension(format!("{} cells for a {nx} x {ny} mask", cells.len())));
        }
        Ok(Self { nx, ny, cells })
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.cells.iter().zip(&other.cells).all(|(a, b)| !a || *b)
    }
}

/// Target depth map for a hinge cut from the sheet.
///
/// Depth is `sheet - t(s)` for one-sided cuts and half of that per side for
/// two-sided cuts, uniform across the width. The map has
/// `round(L / pitch) + 1` by `round(w / pitch) + 1` nodes inside the hinge
/// window, surrounded by `margin` cells of zero depth.
pub fn profile_to_depthmap(
    hinge: &HingeSpec,
    pitch_um: f64,
    sides: Sides,
    margin: usize,
) -> Result<DepthMap, PlannerError> {
    if !(pitch_um > 0.0 && pitch_um.is_finite()) {
        return Err(PlannerError::Domain(format!("pitch must be positive, got {pitch_um}")));
    }
    let length_um = hinge.length() * 1e6;
    let width_um = hinge.width() * 1e6;
    let sheet_um = hinge.sheet_thickness() * 1e6;
    let n_len = (length_um / pitch_um).round() as usize;
    let n_wid = (width_um / pitch_um).round() as usize;
    if n_len == 0 {
        return Err(PlannerError::Domain(format!(
            "pitch {pitch_um} um is coarser than the {length_um} um hinge"
        )));
    }
    let profile = hinge.profile();
    let mut column = Vec::with_capacity(n_len + 1);
    for i in 0..=n_len {
        // the last node lands exactly on L even if the pitch does not divide it
        let s_um = if i == n_len { length_um } else { i as f64 * pitch_um };
        let t_um = profile.thickness_at(s_um * 1e-6) * 1e6;
        let cut = sheet_um - t_um;
        if cut < -1e-9 * sheet_um {
            return Err(PlannerError::InfeasibleProfile(format!(
                "thickness {t_um:.3} um at s = {s_um:.3} um exceeds the {sheet_um:.3} um sheet"
            )));
        }
        column.push(cut.max(0.0) / sides.count());
    }
    let nx = n_len + 1 + 2 * margin;
    let ny = n_wid + 1 + 2 * margin;
    let mut depths = vec![0.0; nx * ny];
    for j in margin..margin + n_wid + 1 {
        for (k, d) in column.iter().enumerate() {
            depths[j * nx + margin + k] = *d;
        }
    }
    DepthMap::new(nx, ny, pitch_um, depths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// 1-based; layer 1 is machined first.
    pub index: usize,
    pub mask: Mask,
    pub passes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub nx: usize,
    pub ny: usize,
    pub pitch_um: f64,
    pub layers: Vec<Layer>,
    pub setting: AblationSetting,
}

impl LayerPlan {
    /// Achieved depth per cell: number of layers covering it times the
    /// depth per layer.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut counts = vec![0u32; self.nx * self.ny];
        for l in &self.layers {
            for (c, m) in counts.iter_mut().zip(&l.mask.cells) {
                *c += u32::from(*m);
            }
        }
        counts
            .into_iter()
            .map(|c| c as f64 * self.setting.depth_per_layer_um)
            .collect()
    }

    pub fn is_nested(&self) -> bool {
        self.layers.windows(2).all(|w| w[1].mask.is_subset_of(&w[0].mask))
    }

    /// Text plan: a `plan` header line, then one `layer` line per layer
    /// followed by `ny` rows of `0`/`1`.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let s = &self.setting;
        writeln!(
            out,
            "plan nx={} ny={} pitch_um={} depth_per_layer_um={} passes={} rep_rate_khz={} layers={}",
            self.nx,
            self.ny,
            self.pitch_um,
            s.depth_per_layer_um,
            s.passes_per_layer,
            s.rep_rate_khz,
            self.layers.len()
        )?;
        for l in &self.layers {
            writeln!(out, "layer {} passes={}", l.index, l.passes)?;
            for row in l.mask.cells.chunks(self.nx) {
                let line: String = row.iter().map(|c| if *c { '1' } else { '0' }).collect();
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, PlannerError> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let perr = |line: usize, m: &str| PlannerError::Parse { line, message: m.to_string() };
        let (n0, head) = lines.next().ok_or_else(|| perr(0, "empty plan"))?;
        let head = head?;
        let mut fields = head.split_whitespace();
        if fields.next() != Some("plan") {
            return Err(perr(n0, "expected `plan` header"));
        }
        let mut kv = std::collections::HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| perr(n0, &format!("bad field `{f}`")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        fn get<T: std::str::FromStr>(
            kv: &std::collections::HashMap<String, String>,
            k: &str,
            line: usize,
        ) -> Result<T, PlannerError> {
            kv.get(k).and_then(|v| v.parse().ok()).ok_or(PlannerError::Parse {
                line,
                message: format!("missing or invalid `{k}`"),
            })
        }
        let nx: usize = get(&kv, "nx", n0)?;
        let ny: usize = get(&kv, "ny", n0)?;
        let pitch_um: f64 = get(&kv, "pitch_um", n0)?;
        let n_layers: usize = get(&kv, "layers", n0)?;
        let setting = AblationSetting::manual(
            get(&kv, "depth_per_layer_um", n0)?,
            get(&kv, "passes", n0)?,
            get(&kv, "rep_rate_khz", n0)?,
        )
        .map_err(|e| perr(n0, &e.to_string()))?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated plan"))?;
            let l = l?;
            let mut t = l.split_whitespace();
            let (Some("layer"), Some(idx), Some(p), None) = (t.next(), t.next(), t.next(), t.next()) else {
                return Err(perr(ln, "expected `layer <k> passes=<n>`"));
            };
            let index = idx.parse().map_err(|_| perr(ln, "bad layer index"))?;
            let passes = p
                .strip_prefix("passes=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(ln, "bad passes"))?;
            let mut cells = Vec::with_capacity(nx * ny);
            for _ in 0..ny {
                let (rn, row) = lines.next().ok_or_else(|| perr(0, "truncated mask"))?;
                let row = row?;
                let row = row.trim();
                if row.len() != nx {
                    return Err(perr(rn, &format!("expected {nx} mask cells")));
                }
                for c in row.chars() {
                    cells.push(match c {
                        '1' => true,
                        '0' => false,
                        _ => return Err(perr(rn, &format!("bad mask character `{c}`"))),
                    });
                }
            }
            layers.push(Layer {
                index,
                mask: Mask::new(nx, ny, cells)?,
                passes,
            });
        }
        Ok(Self {
            nx,
            ny,
            pitch_um,
            layers,
            setting,
        })
    }
}

/// Slices a depth map into nested layers. Layer `k` covers every cell with
/// depth at least `(k - 1/2)` times the depth per layer, so each cell's
/// achieved depth is its target rounded to the nearest layer multiple.
pub fn slice(dm: &DepthMap, setting: &AblationSetting) -> Result<LayerPlan, PlannerError> {
    let delta = setting.depth_per_layer_um;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(PlannerError::Domain(format!("depth per layer must be positive, got {delta}")));
    }
    let mut layers = Vec::new();
    for k in 1.. {
        let threshold = (k as f64 - 0.5) * delta;
        let cells: Vec<bool> = dm.depths.iter().map(|d| *d >= threshold).collect();
        if !cells.iter().any(|c| *c) {
            break;
        }
        layers.push(Layer {
            index: k,
            mask: Mask::new(dm.nx, dm.ny, cells)?,
            passes: setting.passes_per_layer,
        });
    }
    Ok(LayerPlan {
        nx: dm.nx,
        ny: dm.ny,
        pitch_um: dm.pitch_um,
        layers,
        setting: *setting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAngle {
    /// Scanlines along `x`.
    Deg0,
    /// Scanlines along `y`.
    Deg90,
}

impl std::str::FromStr for ScanAngle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0" => Ok(Self::Deg0),
            "90" => Ok(Self::Deg90),
            o => Err(format!("scan angle must be 0 or 90, got `{o}`")),
        }
    }
}

/// Scanline fill of a mask. Returns two-point segments in mm.
///
/// Each run of true cells becomes one segment from the first cell center to
/// the last; an isolated cell becomes a segment of one pitch centered on it.
/// With `serpentine`, every other nonempty scanline is traversed backwards.
pub fn rasterize(mask: &Mask, pitch_um: f64, angle: ScanAngle, serpentine: bool) -> Vec<[[f64; 2]; 2]> {
    let (n_lines, n_along) = match angle {
        ScanAngle::Deg0 => (mask.ny, mask.nx),
        ScanAngle::Deg90 => (mask.nx, mask.ny),
    };
    let at = |line: usize, k: usize| match angle {
        ScanAngle::Deg0 => mask.get(k, line),
        ScanAngle::Deg90 => mask.get(line, k),
    };
    let point = |line: f64, along: f64| match angle {
        ScanAngle::Deg0 => [along * pitch_um * 1e-3, line * pitch_um * 1e-3],
        ScanAngle::Deg90 => [line * pitch_um * 1e-3, along * pitch_um * 1e-3],
    };
    let mut out = Vec::new();
    let mut reverse = false;
    for line in 0..n_lines {
        let mut segs = Vec::new();
        let mut k = 0;
        while k < n_along {
            if !at(line, k) {
                k += 1;
                continue;
            }
            let start = k;
            while k < n_along && at(line, k) {
                k += 1;
            }
            let end = k - 1;
            let (a, b) = if start == end {
                (start as f64 - 0.5, start as f64 + 0.5)
            } else {
                (start as f64, end as f64)
            };
            segs.push([point(line as f64, a), point(line as f64, b)]);
        }
        if segs.is_empty() {
            continue;
        }
        if serpentine && reverse {
            segs.reverse();
            for s in &mut segs {
                s.swap(0, 1);
            }
        }
        reverse = !reverse;
        out.extend(segs);
    }
    out
}

/// Rasterizes every layer of a plan into one toolpath, layer by layer.
pub fn plan_toolpath(plan: &LayerPlan, angle: ScanAngle, serpentine: bool) -> Result<Toolpath, PlannerError> {
    let per_layer: Vec<Vec<Polyline>> = plan
        .layers
        .par_iter()
        .map(|l| {
            rasterize(&l.mask, plan.pitch_um, angle, serpentine)
                .into_iter()
                .map(|[a, b]| Polyline::new(l.index, l.passes, vec![a, b]))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(Toolpath {
        polylines: per_layer.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub max_abs_error_um: f64,
    pub rms_error_um: f64,
    pub tolerance_um: f64,
    pub fraction_within: f64,
    /// Set when some cell misses its target by more than half a layer.
    pub exceeds_quantization: bool,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max error {:.4} um, rms {:.4} um, {:.2}% of cells within ±{} um{}",
            self.max_abs_error_um,
            self.rms_error_um,
            100.0 * self.fraction_within,
            self.tolerance_um,
            if self.exceeds_quantization {
                "; EXCEEDS half-layer bound"
            } else {
                ""
            }
        )
    }
}

/// Compares the depth a plan achieves against its target.
pub fn verify_plan(plan: &LayerPlan, target: &DepthMap, tolerance_um: f64) -> Result<VerifyReport, PlannerError> {
    if plan.nx != target.nx || plan.ny != target.ny || plan.pitch_um != target.pitch_um {
        return Err(PlannerError::Dimension(format!(
            "plan is {} x {} at {} um, target {} x {} at {} um",
            plan.nx, plan.ny, plan.pitch_um, target.nx, target.ny, target.pitch_um
        )));
    }
    if !(tolerance_um >= 0.0) {
        return Err(PlannerError::Domain(format!("tolerance must be nonnegative, got {tolerance_um}")));
    }
    let achieved = plan.reconstruct();
    let n = achieved.len() as f64;
    let (mut max, mut ss, mut within) = (0.0f64, 0.0, 0usize);
    for (a, t) in achieved.iter().zip(&target.depths) {
        let e = (a - t).abs();
        max = max.max(e);
        ss += e * e;
        within += usize::from(e <= tolerance_um);
    }
    let half = 0.5 * plan.setting.depth_per_layer_um;
    Ok(VerifyReport {
        max_abs_error_um: max,
        rms_error_um: (ss / n).sqrt(),
        tolerance_um,
        fraction_within: within as f64 / n,
        exceeds_quantization: max > half * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSample {
    pub x_um: f64,
    pub designed_um: f64,
    pub measured_um: f64,
}

impl SectionSample {
    pub fn deviation_um(&self) -> f64 {
        self.measured_um - self.designed_um
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceReport {
    pub band_um: f64,
    /// Fraction of all cells with `|measured - designed| <= band`.
    pub fraction_within: f64,
    pub max_deviation_um: f64,
    pub max_designed_depth_um: f64,
    /// Max deviation as a percentage of the deepest designed cut.
    pub max_deviation_pct: f64,
    pub section_row: usize,
    pub section: Vec<SectionSample>,
    pub note: String,
}

impl fmt::Display for ToleranceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "band: ±{} um", self.band_um)?;
        writeln!(f, "fraction within band: {:.4}", self.fraction_within)?;
        writeln!(
            f,
            "max deviation: {:.3} um ({:.1}% of {:.3} um max cut depth)",
            self.max_deviation_um, self.max_deviation_pct, self.max_designed_depth_um
        )?;
        write!(f, "note: {}", self.note)
    }
}

/// Compares a measured surface with the designed depth map on the same
/// grid, and extracts the profile along row `section_row`.
pub fn tolerance_report(
    designed: &DepthMap,
    measured: &DepthMap,
    band_um: f64,
    section_row: usize,
) -> Result<ToleranceReport, PlannerError> {
    designed.check_same_grid(measured)?;
    if !(band_um >= 0.0 && band_um.is_finite()) {
        return Err(PlannerError::Domain(format!("band must be nonnegative, got {band_um}")));
    }
    if section_row >= designed.ny {
        return Err(PlannerError::Domain(format!(
            "section row {section_row} outside a grid of {} rows",
            designed.ny
        )));
    }
    let mut within = 0usize;
    let mut max_dev = 0.0f64;
    for (d, m) in designed.depths.iter().zip(&measured.depths) {
        let e = (m - d).abs();
        max_dev = max_dev.max(e);
        within += usize::from(e <= band_um);
    }
    let max_designed = designed.max_depth();
    let section = (0..designed.nx)
        .map(|i| SectionSample {
            x_um: i as f64 * designed.pitch_um,
            designed_um: designed.get(i, section_row),
            measured_um: measured.get(i, section_row),
        })
        .collect();
    Ok(ToleranceReport {
        band_um,
        fraction_within: within as f64 / designed.depths.len() as f64,
        max_deviation_um: max_dev,
        max_designed_depth_um: max_designed,
        max_deviation_pct: if max_designed > 0.0 {
            100.0 * max_dev / max_designed
        } else {
            0.0
        },
        section_row,
        section,
        note: format!(
            "mask edges are not compensated for the {} um laser spot at {} um pitch; expect rounded walls and slight over-cut at boundaries",
            crate::lasercal::DEFAULT_SPOT_DIAMETER_UM,
            designed.pitch_um
        ),
    })
}

/// Section profile CSV: `x_um,designed_um,measured_um,deviation_um`.
pub fn write_section_csv<W: Write>(report: &ToleranceReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x_um,designed_um,measured_um,deviation_um")?;
    for s in &report.section {
        writeln!(
            out,
            "{},{},{},{}",
            s.x_um,
            s.designed_um,
            s.measured_um,
            s.deviation_um()
        )?;
    }
    Ok(())
}
