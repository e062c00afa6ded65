//! Thickness variation along a living hinge.

use serde::{Deserialize, Serialize};

use super::MechanicsError;

/// Which faces of the sheet a cut removes material from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    One,
    Both,
}

impl Sides {
    pub fn count(self) -> f64 {
        match self {
            Sides::One => 1.0,
            Sides::Both => 2.0,
        }
    }
}

impl std::str::FromStr for Sides {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" => Ok(Sides::One),
            "both" => Ok(Sides::Both),
            other => Err(format!("expected `one` or `both`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// Constant thickness.
    Rectangular { t: f64 },
    /// Circular cutout centered at mid-length.
    Arc { t_min: f64, radius: f64, sides: Sides },
    /// Piecewise-linear `(s, t)` table.
    Sampled { points: Vec<(f64, f64)> },
}

/// Thickness `t(s)` over `s` in `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessProfile {
    kind: ProfileKind,
    length: f64,
}

fn positive(name: &str, v: f64) -> Result<(), MechanicsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MechanicsError::InvalidGeometry(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ThicknessProfile {
    pub fn rectangular(t: f64, length: f64) -> Result<Self, MechanicsError> {
        positive("thickness", t)?;
        positive("length", length)?;
        Ok(Self {
            kind: ProfileKind::Rectangular { t },
            length,
        })
    }

    /// Arc cutout of radius `radius`; the thinnest point `t_min` sits at `L/2`.
    pub fn arc(t_min: f64, radius: f64, sides: Sides, length: f64) -> Result<Self, MechanicsError> {
        positive("minimum thickness", t_min)?;
        positive("radius", radius)?;
        positive("length", length)?;
        if 0.5 * length > radius {
            return Err(MechanicsError::InvalidGeometry(format!(
                "arc of radius {radius} cannot span a hinge of length {length}"
            )));
        }
        Ok(Self {
            kind: ProfileKind::Arc { t_min, radius, sides },
            length,
        })
    }

    /// Sampled profile; the first station must be at `s = 0` and the last
    /// one defines the length.
    pub fn sampled(points: Vec<(f64, f64)>) -> Result<Self, MechanicsError> {
        if points.len() < 2 {
            return Err(MechanicsError::InvalidGeometry("sampled profile needs at least 2 points".into()));
        }
        if points[0].0 != 0.0 {
            return Err(MechanicsError::InvalidGeometry("sampled profile must start at s = 0".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(MechanicsError::InvalidGeometry("sampled stations must be strictly increasing".into()));
        }
        for &(s, t) in &points {
            if !s.is_finite() {
                return Err(MechanicsError::InvalidGeometry("non-finite station".into()));
            }
            positive("sampled thickness", t)?;
        }
        let length = points[points.len() - 1].0;
        Ok(Self {
            kind: ProfileKind::Sampled { points },
            length,
        })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_rectangular(&self) -> bool {
        matches!(self.kind, ProfileKind::Rectangular { .. })
    }

    /// Thickness at `s`; values outside `[0, L]` are clamped to the ends.
    pub fn thickness_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        match &self.kind {
            ProfileKind::Rectangular { t } => *t,
            ProfileKind::Arc { t_min, radius, sides } => {
                let x = s - 0.5 * self.length;
                let sagitta = radius - (radius * radius - x * x).sqrt();
                t_min + sides.count() * sagitta
            }
            ProfileKind::Sampled { points } => {
                let i = points.partition_point(|p| p.0 <= s);
                if i == 0 {
                    return points[0].1;
                }
                if i == points.len() {
                    return points[points.len() - 1].1;
                }
                let (s0, t0) = points[i - 1];
                let (s1, t1) = points[i];
                t0 + (t1 - t0) * (s - s0) / (s1 - s0)
            }
        }
    }

    pub fn min_thickness(&self) -> f64 {
        match &self.kind {
            ProfileKind::Rectangular { t } => *t,
            ProfileKind::Arc { t_min, .. } => *t_min,
            ProfileKind::Sampled { points } => points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_thickness(&self) -> f64 {
        match &self.kind {
            ProfileKind::Rectangular { t } => *t,
            ProfileKind::Arc { .. } => self.thickness_at(0.0),
            ProfileKind::Sampled { points } => points.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }
}
