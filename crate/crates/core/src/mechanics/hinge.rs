//! Torque-angle response of a living hinge in pure bending.
//!
//! The bending moment is constant along the hinge. For a rectangular hinge
//! every station has the same curvature `theta / L`, which gives a closed
//! form. For any other thickness profile each station's curvature is found
//! by inverting its section moment, and an outer search adjusts the moment
//! until the curvatures integrate to the requested angle.

use rayon::prelude::*;

use crate::material::BilinearMaterial;
use crate::roots::{bisect_increasing, grow_upper, Tolerance};

use super::profile::ThicknessProfile;
use super::section::{rect_energy, rect_moment, FiberSection};
use super::MechanicsError;

/// Bulk sheet thickness used when a spec does not give one.
pub const DEFAULT_SHEET_THICKNESS: f64 = 100e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct HingeSpec {
    profile: ThicknessProfile,
    width: f64,
    material: BilinearMaterial,
    sheet_thickness: f64,
}

impl HingeSpec {
    pub fn new(
        profile: ThicknessProfile,
        width: f64,
        material: BilinearMaterial,
        sheet_thickness: f64,
    ) -> Result<Self, MechanicsError> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(MechanicsError::InvalidGeometry(format!("width must be positive, got {width}")));
        }
        if !(sheet_thickness > 0.0 && sheet_thickness.is_finite()) {
            return Err(MechanicsError::InvalidGeometry(format!(
                "sheet thickness must be positive, got {sheet_thickness}"
            )));
        }
        let t_max = profile.max_thickness();
        // allow a few ulps so an uncut rectangle equal to the sheet passes
        if t_max > sheet_thickness * (1.0 + 1e-12) {
            return Err(MechanicsError::InvalidGeometry(format!(
                "profile reaches {:.3} um, thicker than the {:.3} um sheet",
                t_max * 1e6,
                sheet_thickness * 1e6
            )));
        }
        Ok(Self {
            profile,
            width,
            material,
            sheet_thickness,
        })
    }

    pub fn profile(&self) -> &ThicknessProfile {
        &self.profile
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn material(&self) -> &BilinearMaterial {
        &self.material
    }
    pub fn sheet_thickness(&self) -> f64 {
        self.sheet_thickness
    }
    pub fn length(&self) -> f64 {
        self.profile.length()
    }
}

/// Discretization controls for the station solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub stations: usize,
    pub fibers: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stations: 201,
            fibers: 2000,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), MechanicsError> {
        if self.stations < 101 {
            return Err(MechanicsError::Domain(format!("need at least 101 stations, got {}", self.stations)));
        }
        if self.fibers < 1000 {
            return Err(MechanicsError::Domain(format!("need at least 1000 fibers, got {}", self.fibers)));
        }
        Ok(())
    }
}

/// Response of a hinge bent to one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeResponse {
    pub theta: f64,
    /// Curvature at the thinnest station, 1/m.
    pub kappa_ref: f64,
    /// Bending moment, N·m.
    pub torque: f64,
    /// Stored strain energy, J.
    pub energy: f64,
    pub eps_peak: f64,
    /// `eps_peak` exceeds the material's elastic strain limit.
    pub over_limit: bool,
}

impl HingeResponse {
    fn zero() -> Self {
        Self {
            theta: 0.0,
            kappa_ref: 0.0,
            torque: 0.0,
            energy: 0.0,
            eps_peak: 0.0,
            over_limit: false,
        }
    }

    fn mirrored(mut self, theta: f64) -> Self {
        if theta < 0.0 {
            self.theta = -self.theta;
            self.kappa_ref = -self.kappa_ref;
            self.torque = -self.torque;
        }
        self
    }
}

fn check_theta(theta: f64) -> Result<(), MechanicsError> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(MechanicsError::Domain(format!("non-finite angle {theta}")))
    }
}

/// Closed-form response of a rectangular hinge.
pub fn torque_rect_analytical(hinge: &HingeSpec, theta: f64) -> Result<HingeResponse, MechanicsError> {
    check_theta(theta)?;
    let super::profile::ProfileKind::Rectangular { t } = *hinge.profile.kind() else {
        return Err(MechanicsError::WrongProfile(
            "closed form applies to rectangular profiles only; use the numerical solver".into(),
        ));
    };
    let th = theta.abs();
    let l = hinge.length();
    let kappa = th / l;
    let mat = &hinge.material;
    let eps_peak = 0.5 * kappa * t;
    Ok(HingeResponse {
        theta: th,
        kappa_ref: kappa,
        torque: rect_moment(mat, t, hinge.width, kappa),
        energy: l * rect_energy(mat, t, hinge.width, kappa),
        eps_peak,
        over_limit: mat.exceeds_limit(eps_peak),
    }
    .mirrored(theta))
}

/// Station discretization of a hinge, reusable across angles.
///
/// Every station is a `w` x `t(s)` rectangle. All stations share one fiber
/// layout on a unit rectangle: a station of half-thickness `c` at curvature
/// `kappa` carries moment `w c^2 m(kappa c)` and energy `w c e(kappa c)`,
/// where `m` and `e` are the unit-section moment and energy as functions of
/// the peak strain.
#[derive(Debug, Clone)]
pub struct StationModel {
    material: BilinearMaterial,
    width: f64,
    ds: f64,
    half: Vec<f64>,
    thinnest: usize,
    unit: FiberSection,
    unit_i: f64,
    /// Unit-section `(peak strain, moment)` at each fiber's first yield,
    /// ascending. The moment is affine in the strain between knots.
    knots: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct StationSolve {
    theta: f64,
    energy: f64,
    eps_peak: f64,
    kappa_ref: f64,
}

impl StationModel {
    pub fn new(hinge: &HingeSpec, opts: SolverOptions) -> Result<Self, MechanicsError> {
        opts.validate()?;
        let l = hinge.length();
        let ds = l / opts.stations as f64;
        let half: Vec<f64> = (0..opts.stations)
            .map(|i| 0.5 * hinge.profile.thickness_at((i as f64 + 0.5) * ds))
            .collect();
        let thinnest = half
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let unit = FiberSection::rectangle(2.0, 1.0, opts.fibers)?;
        let unit_i = unit.second_moment();
        let mat = hinge.material;
        let knots = unit
            .fiber_heights()
            .iter()
            .rev()
            .take_while(|&&y| y > 0.0)
            .map(|&y| {
                let e = mat.eps_l() / y;
                (e, unit.moment(&mat, e, 0.0))
            })
            .collect();
        Ok(Self {
            material: mat,
            width: hinge.width,
            ds,
            half,
            thinnest,
            unit,
            unit_i,
            knots,
        })
    }

    pub fn station_count(&self) -> usize {
        self.half.len()
    }

    /// Thickness at each midpoint station.
    pub fn station_thickness(&self) -> impl Iterator<Item = f64> + '_ {
        self.half.iter().map(|c| 2.0 * c)
    }

    /// Peak strain of the unit section carrying normalized moment `target`.
    fn invert_unit(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        let mat = &self.material;
        let k = self.knots.partition_point(|&(_, m)| m <= target);
        if k == 0 {
            return target / (mat.e() * self.unit_i);
        }
        let (e0, m0) = self.knots[k - 1];
        if k == self.knots.len() {
            // every fiber on the plateau
            return e0 + (target - m0) / (mat.en() * self.unit_i);
        }
        let (e1, m1) = self.knots[k];
        e0 + (target - m0) * (e1 - e0) / (m1 - m0)
    }

    /// Moment carried by station `i` at curvature `kappa`.
    pub fn station_moment(&self, i: usize, kappa: f64) -> f64 {
        let c = self.half[i];
        self.width * c * c * self.unit.moment(&self.material, kappa * c, 0.0)
    }

    fn angle_for(&self, moment: f64) -> f64 {
        self.half
            .iter()
            .map(|&c| self.invert_unit(moment / (self.width * c * c)) / c)
            .sum::<f64>()
            * self.ds
    }

    fn state_for(&self, moment: f64) -> StationSolve {
        let mut theta = 0.0;
        let mut energy = 0.0;
        let mut eps_peak: f64 = 0.0;
        let mut kappa_ref = 0.0;
        for (i, &c) in self.half.iter().enumerate() {
            let e = self.invert_unit(moment / (self.width * c * c));
            let kappa = e / c;
            theta += kappa;
            energy += self.width * c * self.unit.energy(&self.material, e, 0.0);
            eps_peak = eps_peak.max(e);
            if i == self.thinnest {
                kappa_ref = kappa;
            }
        }
        StationSolve {
            theta: theta * self.ds,
            energy: energy * self.ds,
            eps_peak,
            kappa_ref,
        }
    }

    /// Solves for the moment that bends the hinge to `theta`.
    pub fn solve(&self, theta: f64) -> Result<HingeResponse, MechanicsError> {
        check_theta(theta)?;
        let th = theta.abs();
        if th == 0.0 {
            return Ok(HingeResponse::zero());
        }
        let l = self.ds * self.half.len() as f64;
        // the thinnest station bent uniformly to theta/L never overshoots
        let start = self.station_moment(self.thinnest, th / l);
        let bracket = grow_upper(|m| self.angle_for(m), th, start, 60).map_err(|b| MechanicsError::SolverFailure {
            theta: th,
            message: format!("no moment bracket after 60 doublings; last tried [{:e}, {:e}] N·m", b.lo, b.hi),
        })?;
        let b = bisect_increasing(|m| self.angle_for(m), th, bracket.lo, bracket.hi, Tolerance::TIGHT);
        let moment = b.mid();
        let s = self.state_for(moment);
        if (s.theta - th).abs() > 1e-8 * th.max(1e-6) {
            return Err(MechanicsError::SolverFailure {
                theta: th,
                message: format!(
                    "angle residual {:e} rad after bisection on [{:e}, {:e}] N·m",
                    s.theta - th,
                    b.lo,
                    b.hi
                ),
            });
        }
        Ok(HingeResponse {
            theta: th,
            kappa_ref: s.kappa_ref,
            torque: moment,
            energy: s.energy,
            eps_peak: s.eps_peak,
            over_limit: self.material.exceeds_limit(s.eps_peak),
        }
        .mirrored(theta))
    }
}

/// Station-solver response at a single angle.
pub fn torque_profile_numerical(
    hinge: &HingeSpec,
    theta: f64,
    opts: SolverOptions,
) -> Result<HingeResponse, MechanicsError> {
    StationModel::new(hinge, opts)?.solve(theta)
}

/// A solver bound to one hinge: closed form for rectangles, stations otherwise.
#[derive(Debug, Clone)]
pub enum HingeModel<'a> {
    Analytical(&'a HingeSpec),
    Numerical(Box<StationModel>),
}

impl<'a> HingeModel<'a> {
    pub fn new(hinge: &'a HingeSpec, opts: SolverOptions) -> Result<Self, MechanicsError> {
        if hinge.profile.is_rectangular() {
            Ok(Self::Analytical(hinge))
        } else {
            Ok(Self::Numerical(Box::new(StationModel::new(hinge, opts)?)))
        }
    }

    pub fn response(&self, theta: f64) -> Result<HingeResponse, MechanicsError> {
        match self {
            Self::Analytical(h) => torque_rect_analytical(h, theta),
            Self::Numerical(m) => m.solve(theta),
        }
    }
}

/// Response at one angle, dispatching on the profile kind.
pub fn torque(hinge: &HingeSpec, theta: f64, opts: SolverOptions) -> Result<HingeResponse, MechanicsError> {
    HingeModel::new(hinge, opts)?.response(theta)
}

/// Sampled torque-angle sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCurve {
    pub samples: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub theta: f64,
    /// Absent when the curve was read back from CSV.
    pub kappa_ref: Option<f64>,
    pub torque: f64,
    pub energy: f64,
    pub eps_peak: f64,
    pub over_limit: bool,
}

impl From<HingeResponse> for CurvePoint {
    fn from(r: HingeResponse) -> Self {
        Self {
            theta: r.theta,
            kappa_ref: Some(r.kappa_ref),
            torque: r.torque,
            energy: r.energy,
            eps_peak: r.eps_peak,
            over_limit: r.over_limit,
        }
    }
}

impl TorqueCurve {
    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|p| p.theta)
    }

    pub fn torques(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|p| p.torque)
    }

    /// Linear interpolation of torque; `None` outside the sampled range.
    pub fn torque_at(&self, theta: f64) -> Option<f64> {
        let s = &self.samples;
        let first = s.first()?;
        let last = s.last()?;
        if theta < first.theta || theta > last.theta {
            return None;
        }
        let i = s.partition_point(|p| p.theta <= theta);
        if i == s.len() {
            return Some(last.torque);
        }
        if i == 0 {
            return Some(first.torque);
        }
        let (a, b) = (&s[i - 1], &s[i]);
        if b.theta == a.theta {
            return Some(b.torque);
        }
        Some(a.torque + (b.torque - a.torque) * (theta - a.theta) / (b.theta - a.theta))
    }

    /// Checks the ordering invariants of a sweep.
    pub fn check_invariants(&self) -> Result<(), String> {
        for w in self.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if !(b.theta > a.theta) {
                return Err(format!("theta not increasing at {}", b.theta));
            }
            if b.torque < a.torque {
                return Err(format!("torque decreases at theta {}", b.theta));
            }
            if b.energy < a.energy {
                return Err(format!("energy decreases at theta {}", b.theta));
            }
            if b.eps_peak < a.eps_peak {
                return Err(format!("peak strain decreases at theta {}", b.theta));
            }
        }
        Ok(())
    }
}

/// Uniform sweep of `n` angles over `[0, theta_max]`.
pub fn torque_curve(
    hinge: &HingeSpec,
    theta_max: f64,
    n: usize,
    opts: SolverOptions,
) -> Result<TorqueCurve, MechanicsError> {
    if n < 2 {
        return Err(MechanicsError::Domain(format!("sweep needs n >= 2, got {n}")));
    }
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(MechanicsError::Domain(format!("theta_max must be positive, got {theta_max}")));
    }
    let model = HingeModel::new(hinge, opts)?;
    let step = theta_max / (n - 1) as f64;
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = if i == n - 1 { theta_max } else { step * i as f64 };
            model
                .response(theta)
                .map(CurvePoint::from)
                .map_err(|e| e.at_angle(theta))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TorqueCurve { samples })
}

/// Peak strain at angle `theta`.
pub fn max_strain(hinge: &HingeSpec, theta: f64, opts: SolverOptions) -> Result<f64, MechanicsError> {
    check_theta(theta)?;
    if let super::profile::ProfileKind::Rectangular { t } = *hinge.profile.kind() {
        return Ok(theta.abs() * t / (2.0 * hinge.length()));
    }
    Ok(torque_profile_numerical(hinge, theta, opts)?.eps_peak)
}

fn check_eps_limit(eps_limit: f64) -> Result<(), MechanicsError> {
    if eps_limit > 0.0 && eps_limit <= crate::material::EPS_MAX_CEILING {
        Ok(())
    } else {
        Err(MechanicsError::Domain(format!("strain limit must lie in (0, 0.12], got {eps_limit}")))
    }
}

/// Largest angle whose peak strain stays at `eps_limit`.
pub fn elastic_limit(hinge: &HingeSpec, eps_limit: f64, opts: SolverOptions) -> Result<f64, MechanicsError> {
    check_eps_limit(eps_limit)?;
    let l = hinge.length();
    if let super::profile::ProfileKind::Rectangular { t } = *hinge.profile.kind() {
        return Ok(2.0 * l * eps_limit / t);
    }
    let model = StationModel::new(hinge, opts)?;
    let strain = |theta: f64| model.solve(theta).map(|r| r.eps_peak);
    // a uniform hinge at the thinnest thickness reaches the limit first
    let mut lo = 0.0;
    let mut hi = 2.0 * l * eps_limit / hinge.profile.min_thickness();
    let mut doublings = 0;
    while strain(hi)? < eps_limit {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(MechanicsError::SolverFailure {
                theta: hi,
                message: "no angle reaches the strain limit".into(),
            });
        }
    }
    let mut failure = None;
    let b = bisect_increasing(
        |th| match strain(th) {
            Ok(e) => e,
            Err(err) => {
                failure.get_or_insert(err);
                f64::INFINITY
            }
        },
        eps_limit,
        lo,
        hi,
        Tolerance { rel: 1e-10, max_iter: 200 },
    );
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(b.mid())
}

/// Thickest rectangular hinge of length `length` that bends to `theta`
/// without exceeding `eps_limit`.
pub fn max_thickness_for(theta: f64, length: f64, eps_limit: f64) -> Result<f64, MechanicsError> {
    check_eps_limit(eps_limit)?;
    if !(theta > 0.0 && theta.is_finite()) || !(length > 0.0 && length.is_finite()) {
        return Err(MechanicsError::Domain(format!(
            "angle and length must be positive (theta = {theta}, L = {length})"
        )));
    }
    Ok(2.0 * length * eps_limit / theta)
}

/// Relative mismatch between the central difference of stored energy and
/// the torque at `theta`.
pub fn castigliano_residual(
    hinge: &HingeSpec,
    theta: f64,
    h: f64,
    opts: SolverOptions,
) -> Result<f64, MechanicsError> {
    let model = HingeModel::new(hinge, opts)?;
    castigliano_residual_with(&model, theta, h)
}

/// [`castigliano_residual`] against a prebuilt model.
pub fn castigliano_residual_with(model: &HingeModel<'_>, theta: f64, h: f64) -> Result<f64, MechanicsError> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(MechanicsError::Domain(format!("step h must lie in [1e-7, 1e-3] rad, got {h}")));
    }
    if !(theta - h >= 0.0) {
        return Err(MechanicsError::Domain(format!("theta - h must be nonnegative (theta = {theta}, h = {h})")));
    }
    let up = model.response(theta + h)?.energy;
    let down = model.response(theta - h)?.energy;
    let m = model.response(theta)?.torque;
    let du = (up - down) / (2.0 * h);
    Ok((du - m).abs() / m.abs().max(f64::EPSILON))
}
