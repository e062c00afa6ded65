//! Hinge specification files and torque-curve CSV.
//!
//! A hinge spec is TOML, all lengths in metres:
//!
//! ```toml
//! length_m = 4.0e-4
//! width_m = 2.0e-3
//! sheet_thickness_m = 1.0e-4      # optional, defaults to 100 um
//! material_file = "nitinol.toml"  # or an inline [material] table
//!
//! [profile]
//! kind = "arc"                    # "rectangular" | "arc" | "sampled"
//! t_min_m = 2.0e-5
//! radius_m = 1.0e-3
//! sides = "both"                  # "one" | "both"
//! ```
//!
//! Rectangular profiles take `t_m`. Sampled profiles take
//! `points = [[s_m, t_m], ...]`; `length_m` is then optional and must match
//! the last station when given.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::material::{parse_material_toml, BilinearMaterial};

use super::hinge::{CurvePoint, HingeSpec, TorqueCurve, DEFAULT_SHEET_THICKNESS};
use super::profile::{Sides, ThicknessProfile};
use super::MechanicsError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    length_m: Option<f64>,
    width_m: f64,
    sheet_thickness_m: Option<f64>,
    material_file: Option<String>,
    material: Option<BilinearMaterial>,
    profile: RawProfile,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawProfile {
    Rectangular { t_m: f64 },
    Arc { t_min_m: f64, radius_m: f64, sides: Sides },
    Sampled { points: Vec<[f64; 2]> },
}

/// Parses a hinge spec; `base_dir` resolves a relative `material_file`.
pub fn parse_hinge_spec(text: &str, base_dir: &Path) -> Result<HingeSpec, MechanicsError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| MechanicsError::Parse(e.to_string()))?;
    let material = match (raw.material, raw.material_file) {
        (Some(m), None) => m,
        (None, Some(f)) => {
            let path = base_dir.join(f);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| MechanicsError::Io(format!("{}: {e}", path.display())))?;
            parse_material_toml(&text)?
        }
        (Some(_), Some(_)) => {
            return Err(MechanicsError::Parse("give either [material] or material_file, not both".into()))
        }
        (None, None) => {
            return Err(MechanicsError::Parse(
                "material parameters are required ([material] table or material_file)".into(),
            ))
        }
    };
    let need_length = || {
        raw.length_m
            .ok_or_else(|| MechanicsError::Parse("length_m is required for this profile".into()))
    };
    let profile = match raw.profile {
        RawProfile::Rectangular { t_m } => ThicknessProfile::rectangular(t_m, need_length()?)?,
        RawProfile::Arc { t_min_m, radius_m, sides } => ThicknessProfile::arc(t_min_m, radius_m, sides, need_length()?)?,
        RawProfile::Sampled { points } => {
            let p = ThicknessProfile::sampled(points.into_iter().map(|[s, t]| (s, t)).collect())?;
            if let Some(l) = raw.length_m {
                if (l - p.length()).abs() > 1e-12 * l.abs() {
                    return Err(MechanicsError::Parse(format!(
                        "length_m = {l} disagrees with last sampled station {}",
                        p.length()
                    )));
                }
            }
            p
        }
    };
    HingeSpec::new(
        profile,
        raw.width_m,
        material,
        raw.sheet_thickness_m.unwrap_or(DEFAULT_SHEET_THICKNESS),
    )
}

pub fn load_hinge_spec(path: &Path) -> Result<HingeSpec, MechanicsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MechanicsError::Io(format!("{}: {e}", path.display())))?;
    parse_hinge_spec(&text, path.parent().unwrap_or(Path::new(".")))
}

const CURVE_HEADER: &str = "theta_rad,torque_nm,energy_j,eps_peak,over_limit";

/// Writes `theta_rad,torque_nm,energy_j,eps_peak,over_limit` rows.
pub fn write_curve_csv<W: Write>(curve: &TorqueCurve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for p in &curve.samples {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{}",
            p.theta,
            p.torque,
            p.energy,
            p.eps_peak,
            u8::from(p.over_limit)
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct CurveRow {
    theta_rad: f64,
    torque_nm: f64,
    energy_j: f64,
    eps_peak: f64,
    over_limit: u8,
}

pub fn read_curve_csv<R: Read>(reader: R) -> Result<TorqueCurve, MechanicsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| MechanicsError::Parse(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != CURVE_HEADER {
        return Err(MechanicsError::Parse(format!("expected header `{CURVE_HEADER}`")));
    }
    let samples = rdr
        .deserialize::<CurveRow>()
        .map(|r| {
            r.map(|r| CurvePoint {
                theta: r.theta_rad,
                kappa_ref: None,
                torque: r.torque_nm,
                energy: r.energy_j,
                eps_peak: r.eps_peak,
                over_limit: r.over_limit != 0,
            })
            .map_err(|e| MechanicsError::Parse(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TorqueCurve { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::{torque_curve, ProfileKind, SolverOptions};

    const INLINE: &str = r#"
length_m = 4.0e-4
width_m = 2.0e-3

[material]
e_pa = 6.0e10
en_pa = 2.0e10
eps_l = 0.01

[profile]
kind = "arc"
t_min_m = 2.0e-5
radius_m = 1.0e-3
sides = "both"
"#;

    #[test]
    fn parses_inline_arc() {
        let h = parse_hinge_spec(INLINE, Path::new(".")).unwrap();
        assert_eq!(h.sheet_thickness(), 100e-6);
        assert!(matches!(h.profile().kind(), ProfileKind::Arc { sides: Sides::Both, .. }));
        assert_eq!(h.material().eps_max(), 0.06);
    }

    #[test]
    fn material_by_reference() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.toml"), "e_pa = 7e10\nen_pa = 2e10\neps_l = 0.012\n").unwrap();
        let spec = "length_m = 1e-4\nwidth_m = 1e-3\nmaterial_file = \"m.toml\"\n[profile]\nkind = \"rectangular\"\nt_m = 2e-5\n";
        std::fs::write(dir.path().join("h.toml"), spec).unwrap();
        let h = load_hinge_spec(&dir.path().join("h.toml")).unwrap();
        assert_eq!(h.material().e(), 7e10);
    }

    #[test]
    fn rejects_missing_material_and_bad_fields() {
        let spec = "length_m = 1e-4\nwidth_m = 1e-3\n[profile]\nkind = \"rectangular\"\nt_m = 2e-5\n";
        assert!(parse_hinge_spec(spec, Path::new(".")).is_err());
        let bad = INLINE.replace("sides = \"both\"", "sides = \"three\"");
        assert!(parse_hinge_spec(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn sampled_length_must_agree() {
        let spec = "length_m = 3e-4\nwidth_m = 1e-3\n[material]\ne_pa = 6e10\nen_pa = 2e10\neps_l = 0.01\n[profile]\nkind = \"sampled\"\npoints = [[0.0, 3e-5], [2e-4, 3e-5]]\n";
        assert!(parse_hinge_spec(spec, Path::new(".")).is_err());
        let ok = spec.replace("length_m = 3e-4\n", "");
        assert_eq!(parse_hinge_spec(&ok, Path::new(".")).unwrap().length(), 2e-4);
    }

    #[test]
    fn curve_csv_round_trip() {
        let h = parse_hinge_spec(INLINE, Path::new(".")).unwrap();
        let c = torque_curve(&h, 0.5, 5, SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta_rad,torque_nm,energy_j,eps_peak,over_limit\n"));
        let back = read_curve_csv(buf.as_slice()).unwrap();
        for (a, b) in c.samples.iter().zip(&back.samples) {
            assert_eq!((a.theta, a.torque, a.energy, a.eps_peak), (b.theta, b.torque, b.energy, b.eps_peak));
        }
    }
}
