//! Optional project file supplying defaults for subcommands.
//!
//! ```toml
//! material = "nitinol.toml"
//! hinge_spec = "hinge.toml"
//! pitch_um = 5.0
//! output_dir = "out"
//!
//! [laser]
//! rep_rate_khz = 200.0
//! passes_per_layer = 5
//! depth_per_layer_um = 5.0
//! ```
//!
//! Relative paths are resolved against the project file's directory.

use std::path::{Path, PathBuf};

use nitiflex::lasercal::AblationSetting;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    material: Option<PathBuf>,
    hinge_spec: Option<PathBuf>,
    laser: Option<RawLaser>,
    pitch_um: Option<f64>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    rep_rate_khz: f64,
    passes_per_layer: u32,
    depth_per_layer_um: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectConfig {
    pub material: Option<PathBuf>,
    pub hinge_spec: Option<PathBuf>,
    pub laser: Option<AblationSetting>,
    pub pitch_um: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let existing = |p: Option<PathBuf>| -> Result<Option<PathBuf>, CliError> {
            match p {
                None => Ok(None),
                Some(p) => {
                    let full = base.join(p);
                    if full.is_file() {
                        Ok(Some(full))
                    } else {
                        Err(CliError::Config(format!("referenced file {} does not exist", full.display())))
                    }
                }
            }
        };
        let laser = raw
            .laser
            .map(|l| AblationSetting::manual(l.depth_per_layer_um, l.passes_per_layer, l.rep_rate_khz))
            .transpose()?;
        if let Some(p) = raw.pitch_um {
            if !(p > 0.0 && p.is_finite()) {
                return Err(CliError::Config(format!("pitch_um must be positive, got {p}")));
            }
        }
        Ok(Self {
            material: existing(raw.material)?,
            hinge_spec: existing(raw.hinge_spec)?,
            laser,
            pitch_um: raw.pitch_um,
            output_dir: raw.output_dir.map(|d| base.join(d)),
        })
    }

    /// Places a relative output path under `output_dir` when one is set.
    pub fn output_path(&self, p: &Path) -> PathBuf {
        match &self.output_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}
