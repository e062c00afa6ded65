//! Bilinear superelastic constitutive law.
//!
//! Below the critical strain `eps_l` the alloy is austenite with modulus `E`.
//! Past it, the stress-induced martensite mixture stiffens at the lower
//! modulus `En`. The law is symmetric in tension and compression and has no
//! unloading hysteresis.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default elastic strain limit.
pub const DEFAULT_EPS_MAX: f64 = 0.06;
/// Hard upper bound accepted for `eps_max`.
pub const EPS_MAX_CEILING: f64 = 0.12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("invalid material parameters: {0}")]
    InvalidParameters(String),
    #[error("non-finite strain {0}")]
    Domain(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("malformed stress-strain data: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl MaterialError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidParameters(_) => "InvalidParameters",
            Self::Domain(_) => "Domain",
            Self::InsufficientData(_) => "InsufficientData",
            Self::FitDegenerate(_) => "FitDegenerate",
            Self::Parse(_) => "Parse",
            Self::Io(_) => "Io",
        }
    }
}

/// Piecewise-linear superelastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMaterial", into = "RawMaterial")]
pub struct BilinearMaterial {
    e: f64,
    en: f64,
    eps_l: f64,
    eps_max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMaterial {
    e_pa: f64,
    en_pa: f64,
    eps_l: f64,
    #[serde(default = "default_eps_max")]
    eps_max: f64,
}

fn default_eps_max() -> f64 {
    DEFAULT_EPS_MAX
}

impl TryFrom<RawMaterial> for BilinearMaterial {
    type Error = MaterialError;
    fn try_from(r: RawMaterial) -> Result<Self, Self::Error> {
        BilinearMaterial::with_limit(r.e_pa, r.en_pa, r.eps_l, r.eps_max)
    }
}

impl From<BilinearMaterial> for RawMaterial {
    fn from(m: BilinearMaterial) -> Self {
        RawMaterial {
            e_pa: m.e,
            en_pa: m.en,
            eps_l: m.eps_l,
            eps_max: m.eps_max,
        }
    }
}

impl BilinearMaterial {
    /// Material with the default 6% elastic strain limit.
    pub fn new(e: f64, en: f64, eps_l: f64) -> Result<Self, MaterialError> {
        Self::with_limit(e, en, eps_l, DEFAULT_EPS_MAX)
    }

    pub fn with_limit(e: f64, en: f64, eps_l: f64, eps_max: f64) -> Result<Self, MaterialError> {
        let bad = |msg: String| Err(MaterialError::InvalidParameters(msg));
        if ![e, en, eps_l, eps_max].iter().all(|v| v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if e <= 0.0 {
            return bad(format!("E must be positive, got {e}"));
        }
        if !(en > 0.0 && en < e) {
            return bad(format!("En must satisfy 0 < En < E, got En={en}, E={e}"));
        }
        if !(eps_l > 0.0 && eps_l < eps_max) {
            return bad(format!(
                "critical strain must satisfy 0 < eps_l < eps_max, got eps_l={eps_l}, eps_max={eps_max}"
            ));
        }
        if eps_max > EPS_MAX_CEILING {
            return bad(format!("eps_max must not exceed {EPS_MAX_CEILING}, got {eps_max}"));
        }
        Ok(Self { e, en, eps_l, eps_max })
    }

    /// Illustrative parameters (E = 60 GPa, En = 20 GPa, eps_l = 1%).
    ///
    /// These are NOT measured values for any particular sheet. Supply real
    /// moduli or fit them from a stress-strain CSV for design work.
    pub fn placeholder() -> Self {
        Self {
            e: 60e9,
            en: 20e9,
            eps_l: 0.01,
            eps_max: DEFAULT_EPS_MAX,
        }
    }

    pub fn e(&self) -> f64 {
        self.e
    }
    pub fn en(&self) -> f64 {
        self.en
    }
    pub fn eps_l(&self) -> f64 {
        self.eps_l
    }
    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    /// Stress at the critical strain, `E * eps_l`.
    pub fn plateau_onset_stress(&self) -> f64 {
        self.e * self.eps_l
    }

    /// Stress for a given strain (Pa).
    pub fn stress(&self, eps: f64) -> Result<f64, MaterialError> {
        check_finite(eps)?;
        Ok(self.stress_unchecked(eps))
    }

    /// Strain energy density `u(eps)`, the integral of stress from 0 (J/m³).
    pub fn strain_energy_density(&self, eps: f64) -> Result<f64, MaterialError> {
        check_finite(eps)?;
        Ok(self.energy_unchecked(eps))
    }

    /// Tangent modulus. At exactly `|eps| == eps_l` this returns `En`.
    pub fn tangent_modulus(&self, eps: f64) -> Result<f64, MaterialError> {
        check_finite(eps)?;
        Ok(if eps.abs() < self.eps_l { self.e } else { self.en })
    }

    /// Whether a strain magnitude exceeds the elastic strain limit.
    pub fn exceeds_limit(&self, eps: f64) -> bool {
        eps.abs() > self.eps_max
    }

    #[inline]
    pub(crate) fn stress_unchecked(&self, eps: f64) -> f64 {
        let a = eps.abs();
        if a <= self.eps_l {
            self.e * eps
        } else {
            let s = self.e * self.eps_l + self.en * (a - self.eps_l);
            if eps < 0.0 {
                -s
            } else {
                s
            }
        }
    }

    #[inline]
    pub(crate) fn energy_unchecked(&self, eps: f64) -> f64 {
        let a = eps.abs();
        if a <= self.eps_l {
            0.5 * self.e * a * a
        } else {
            let z = a - self.eps_l;
            0.5 * self.e * self.eps_l * self.eps_l + self.e * self.eps_l * z + 0.5 * self.en * z * z
        }
    }
}

impl fmt::Display for BilinearMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "E = {:.4} GPa, En = {:.4} GPa, eps_l = {:.5}, eps_max = {:.4}",
            self.e / 1e9,
            self.en / 1e9,
            self.eps_l,
            self.eps_max
        )
    }
}

fn check_finite(eps: f64) -> Result<(), MaterialError> {
    if eps.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::Domain(eps))
    }
}

/// One point of a measured tensile curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressStrainSample {
    pub strain: f64,
    #[serde(rename = "stress_pa")]
    pub stress: f64,
}

impl StressStrainSample {
    pub fn new(strain: f64, stress: f64) -> Self {
        Self { strain, stress }
    }
}

/// Outcome of [`fit_bilinear`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub material: BilinearMaterial,
    /// Root-mean-square stress residual, Pa.
    pub residual_rms: f64,
    /// Number of breakpoint candidates that admitted a two-segment fit.
    pub candidates: usize,
}

/// Two-segment least-squares fit of a bilinear law through the origin.
///
/// Between two consecutive sample strains the law separates into a line
/// through the origin for the lower samples and a free line
/// `sigma = En * eps + (E - En) * b` for the upper ones, so each interval
/// has a closed-form optimum; it is kept when its breakpoint `b` lands
/// inside the interval. Breakpoints exactly at sample strains are scored
/// with a 2x2 solve for `(E, En)`. The lowest residual wins.
pub fn fit_bilinear(samples: &[StressStrainSample]) -> Result<FitReport, MaterialError> {
    fit_bilinear_with_limit(samples, DEFAULT_EPS_MAX)
}

pub fn fit_bilinear_with_limit(
    samples: &[StressStrainSample],
    eps_max: f64,
) -> Result<FitReport, MaterialError> {
    if samples.len() < 4 {
        return Err(MaterialError::InsufficientData(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        if !s.strain.is_finite() || !s.stress.is_finite() {
            return Err(MaterialError::Parse("non-finite sample".into()));
        }
        if s.strain < 0.0 {
            return Err(MaterialError::Parse(format!("negative strain {}", s.strain)));
        }
    }
    if samples.windows(2).any(|w| w[1].strain <= w[0].strain) {
        return Err(MaterialError::Parse("strains must be strictly increasing".into()));
    }

    let n = samples.len();
    let mut candidates: Vec<SegmentFit> = Vec::new();
    for j in 1..n - 1 {
        if let Some(f) = fit_at_breakpoint(samples, samples[j].strain) {
            candidates.push(f);
        }
    }
    // lower = samples[..j], upper = samples[j..]
    for j in 1..n - 1 {
        if let Some(f) = fit_in_interval(samples, j) {
            candidates.push(f);
        }
    }
    let Some(best) = candidates.iter().copied().min_by(|a, b| a.sse.total_cmp(&b.sse)) else {
        return Err(MaterialError::FitDegenerate(
            "no breakpoint separates the samples into two regimes".into(),
        ));
    };

    let lo = samples[0].strain;
    let hi = samples[n - 1].strain;
    if !(best.e > 0.0) || !(best.en > 0.0) || best.e - best.en <= 1e-9 * best.e.abs() {
        return Err(MaterialError::FitDegenerate(format!(
            "fitted moduli do not soften (E = {:.6e}, En = {:.6e}); data likely covers one regime",
            best.e, best.en
        )));
    }
    if best.b <= lo || best.b >= hi {
        return Err(MaterialError::FitDegenerate("breakpoint fell on the data boundary".into()));
    }
    let material = BilinearMaterial::with_limit(best.e, best.en, best.b, eps_max)
        .map_err(|e| MaterialError::FitDegenerate(e.to_string()))?;
    Ok(FitReport {
        material,
        residual_rms: (best.sse / n as f64).sqrt(),
        candidates: candidates.len(),
    })
}

#[derive(Debug, Clone, Copy)]
struct SegmentFit {
    b: f64,
    e: f64,
    en: f64,
    sse: f64,
}

fn sse(samples: &[StressStrainSample], b: f64, e: f64, en: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let pred = e * s.strain.min(b) + en * (s.strain - b).max(0.0);
            (s.stress - pred).powi(2)
        })
        .sum()
}

fn fit_at_breakpoint(samples: &[StressStrainSample], b: f64) -> Option<SegmentFit> {
    let below = samples.iter().filter(|s| s.strain <= b).count();
    if below == 0 || below == samples.len() {
        return None;
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let x1 = s.strain.min(b);
        let x2 = (s.strain - b).max(0.0);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        r1 += x1 * s.stress;
        r2 += x2 * s.stress;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det > 1e-12 * s11 * s22) {
        return None;
    }
    let e = (r1 * s22 - r2 * s12) / det;
    let en = (s11 * r2 - s12 * r1) / det;
    Some(SegmentFit { b, e, en, sse: sse(samples, b, e, en) })
}

/// Best fit with the breakpoint strictly between samples `j - 1` and `j`.
fn fit_in_interval(samples: &[StressStrainSample], j: usize) -> Option<SegmentFit> {
    let (lower, upper) = samples.split_at(j);
    if upper.len() < 2 {
        return None;
    }
    let sxx: f64 = lower.iter().map(|s| s.strain * s.strain).sum();
    let sxy: f64 = lower.iter().map(|s| s.strain * s.stress).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let e = sxy / sxx;
    let m = upper.len() as f64;
    let mx = upper.iter().map(|s| s.strain).sum::<f64>() / m;
    let my = upper.iter().map(|s| s.stress).sum::<f64>() / m;
    let (mut uxx, mut uxy) = (0.0, 0.0);
    for s in upper {
        uxx += (s.strain - mx) * (s.strain - mx);
        uxy += (s.strain - mx) * (s.stress - my);
    }
    let en = uxy / uxx;
    let c = my - en * mx;
    let b = c / (e - en);
    if !(b > lower[j - 1].strain && b < upper[0].strain) {
        return None;
    }
    Some(SegmentFit { b, e, en, sse: sse(samples, b, e, en) })
}

/// Reads a `strain,stress_pa` CSV.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<StressStrainSample>, MaterialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| MaterialError::Parse(e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "strain" || &headers[1] != "stress_pa" {
        return Err(MaterialError::Parse(format!(
            "expected header `strain,stress_pa`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| MaterialError::Parse(e.to_string())))
        .collect()
}

pub fn load_samples_csv(path: &Path) -> Result<Vec<StressStrainSample>, MaterialError> {
    let f = std::fs::File::open(path).map_err(|e| MaterialError::Io(format!("{}: {e}", path.display())))?;
    read_samples_csv(f)
}

/// Parses a material file (`e_pa`, `en_pa`, `eps_l`, optional `eps_max`).
pub fn parse_material_toml(text: &str) -> Result<BilinearMaterial, MaterialError> {
    toml::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))
}

pub fn material_to_toml(m: &BilinearMaterial) -> String {
    // RawMaterial always serializes
    toml::to_string(m).expect("material serializes")
}
