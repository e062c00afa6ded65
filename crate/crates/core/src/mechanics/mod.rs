//! Torque-angle models for living hinges.

mod hinge;
mod profile;
mod section;
mod specfile;

use thiserror::Error;

use crate::material::MaterialError;

pub use hinge::{
    castigliano_residual, castigliano_residual_with, elastic_limit, max_strain, max_thickness_for, torque,
    torque_curve, torque_profile_numerical, torque_rect_analytical, CurvePoint, HingeModel, HingeResponse,
    HingeSpec, SolverOptions, StationModel, TorqueCurve, DEFAULT_SHEET_THICKNESS,
};
pub use profile::{ProfileKind, Sides, ThicknessProfile};
pub use section::{
    section_energy, section_moment, section_moment_general, CrossSection, FiberSection, Layer, SectionState,
};
pub use specfile::{load_hinge_spec, parse_hinge_spec, read_curve_csv, write_curve_csv};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("wrong profile: {0}")]
    WrongProfile(String),
    #[error("degenerate section: {0}")]
    DegenerateSection(String),
    #[error("solver failure at theta = {theta} rad: {message}")]
    SolverFailure { theta: f64, message: String },
    #[error("at theta = {theta} rad: {source}")]
    AtAngle {
        theta: f64,
        #[source]
        source: Box<MechanicsError>,
    },
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("malformed hinge file: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl MechanicsError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "Domain",
            Self::InvalidGeometry(_) => "InvalidGeometry",
            Self::WrongProfile(_) => "WrongProfile",
            Self::DegenerateSection(_) => "DegenerateSection",
            Self::SolverFailure { .. } => "SolverFailure",
            Self::AtAngle { source, .. } => source.kind(),
            Self::Material(e) => e.kind(),
            Self::Parse(_) => "Parse",
            Self::Io(_) => "Io",
        }
    }

    pub(crate) fn at_angle(self, theta: f64) -> Self {
        match self {
            e @ Self::SolverFailure { .. } => e,
            e => Self::AtAngle {
                theta,
                source: Box::new(e),
            },
        }
    }
}
