//! Bending of a single cross-section under a prescribed curvature.
//!
//! Plane sections stay plane, so the strain at height `y` is
//! `kappa * (y - y0)` where `y0` is the neutral-axis offset that balances
//! the axial force. Rectangles have a closed form; arbitrary layered
//! sections are integrated over equal-thickness fibers.

use crate::material::BilinearMaterial;
use crate::roots::{bisect_increasing, Tolerance};

use super::MechanicsError;

/// Moment of a `t` x `w` rectangle bent to curvature `kappa` (N·m).
///
/// Odd in `kappa`.
pub fn section_moment(mat: &BilinearMaterial, t: f64, w: f64, kappa: f64) -> Result<f64, MechanicsError> {
    check_geometry(t, w, kappa)?;
    Ok(rect_moment(mat, t, w, kappa))
}

/// Strain energy per unit length of a `t` x `w` rectangle at curvature `kappa` (J/m).
pub fn section_energy(mat: &BilinearMaterial, t: f64, w: f64, kappa: f64) -> Result<f64, MechanicsError> {
    check_geometry(t, w, kappa)?;
    Ok(rect_energy(mat, t, w, kappa))
}

fn check_geometry(t: f64, w: f64, kappa: f64) -> Result<(), MechanicsError> {
    if !(t.is_finite() && w.is_finite() && kappa.is_finite()) {
        return Err(MechanicsError::Domain("non-finite section input".into()));
    }
    if t < 0.0 || w < 0.0 {
        return Err(MechanicsError::Domain(format!(
            "section dimensions must be nonnegative (t = {t}, w = {w})"
        )));
    }
    Ok(())
}

pub(crate) fn rect_moment(mat: &BilinearMaterial, t: f64, w: f64, kappa: f64) -> f64 {
    let k = kappa.abs();
    let c = 0.5 * t;
    let (e, en, el) = (mat.e(), mat.en(), mat.eps_l());
    let m = if k * c <= el {
        e * w * t * t * t / 12.0 * k
    } else {
        let yl = el / k;
        2.0 * w
            * (e * k * yl.powi(3) / 3.0
                + (e - en) * el * (c * c - yl * yl) / 2.0
                + en * k * (c.powi(3) - yl.powi(3)) / 3.0)
    };
    m.copysign(kappa)
}

pub(crate) fn rect_energy(mat: &BilinearMaterial, t: f64, w: f64, kappa: f64) -> f64 {
    let k = kappa.abs();
    let c = 0.5 * t;
    let (e, en, el) = (mat.e(), mat.en(), mat.eps_l());
    if k * c <= el {
        return w * e * k * k * c.powi(3) / 3.0;
    }
    let yl = el / k;
    // outer band: substitute z = k*y - eps_l, z in [0, k*c - eps_l]
    let z = k * c - el;
    let outer = (0.5 * e * el * el * z + 0.5 * e * el * z * z + en * z.powi(3) / 6.0) / k;
    2.0 * w * (e * k * k * yl.powi(3) / 6.0 + outer)
}

/// A stack of constant-width layers, listed bottom to top.
///
/// Heights are measured from the geometric mid-plane, so the section spans
/// `[-h/2, h/2]` with `h` the total height.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness: f64,
    pub width: f64,
}

impl CrossSection {
    pub fn new(layers: Vec<Layer>) -> Result<Self, MechanicsError> {
        if layers.is_empty() {
            return Err(MechanicsError::DegenerateSection("section has no layers".into()));
        }
        for l in &layers {
            if !(l.thickness > 0.0 && l.thickness.is_finite()) || !(l.width >= 0.0 && l.width.is_finite()) {
                return Err(MechanicsError::Domain(format!(
                    "layer needs positive thickness and nonnegative width, got {l:?}"
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn rectangle(t: f64, w: f64) -> Result<Self, MechanicsError> {
        Self::new(vec![Layer { thickness: t, width: w }])
    }

    /// Flange of width `flange_w` on top of a web of width `web_w`.
    pub fn tee(web_t: f64, web_w: f64, flange_t: f64, flange_w: f64) -> Result<Self, MechanicsError> {
        Self::new(vec![
            Layer { thickness: web_t, width: web_w },
            Layer { thickness: flange_t, width: flange_w },
        ])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn height(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    pub fn area(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness * l.width).sum()
    }

    /// Width at height `y` (mid-plane origin); zero outside the section.
    pub fn width_at(&self, y: f64) -> f64 {
        let mut bottom = -0.5 * self.height();
        for l in &self.layers {
            let top = bottom + l.thickness;
            if y >= bottom && y < top {
                return l.width;
            }
            bottom = top;
        }
        if y == bottom {
            self.layers.last().map_or(0.0, |l| l.width)
        } else {
            0.0
        }
    }

    /// True when the layer stack reads the same from both faces.
    pub fn is_symmetric(&self) -> bool {
        self.layers.iter().eq(self.layers.iter().rev())
    }
}

/// Converged bending state of a section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionState {
    pub kappa: f64,
    /// Neutral-axis offset from the mid-plane, m.
    pub y0: f64,
    pub moment: f64,
    pub axial: f64,
}

/// Fiber discretization of a [`CrossSection`].
///
/// Fibers have equal thickness and are evaluated at their midpoints. Prefix
/// sums of the fiber areas and their first and second moments let each
/// regime band (elastic core, upper and lower plateau) be summed in one step,
/// so an evaluation costs two binary searches instead of a pass over every
/// fiber. The result is the same midpoint sum, reassociated.
#[derive(Debug, Clone)]
pub struct FiberSection {
    y: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    y_lo: f64,
    y_hi: f64,
    symmetric: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Band {
    area: f64,
    first: f64,
    second: f64,
}

impl FiberSection {
    pub fn new(section: &CrossSection, fibers: usize) -> Result<Self, MechanicsError> {
        if fibers == 0 {
            return Err(MechanicsError::Domain("fiber count must be positive".into()));
        }
        let h = section.height();
        let dy = h / fibers as f64;
        let y_lo = -0.5 * h;
        let y: Vec<f64> = (0..fibers).map(|j| y_lo + (j as f64 + 0.5) * dy).collect();
        let a: Vec<f64> = y.iter().map(|&yj| section.width_at(yj) * dy).collect();
        if a.iter().all(|&v| v == 0.0) {
            return Err(MechanicsError::DegenerateSection("section has zero width everywhere".into()));
        }
        Ok(Self::from_fibers(y, a, y_lo, -y_lo, section.is_symmetric()))
    }

    /// Rectangle `t` x `w`, mid-plane origin.
    pub fn rectangle(t: f64, w: f64, fibers: usize) -> Result<Self, MechanicsError> {
        Self::new(&CrossSection::rectangle(t, w)?, fibers)
    }

    fn from_fibers(y: Vec<f64>, a: Vec<f64>, y_lo: f64, y_hi: f64, symmetric: bool) -> Self {
        let n = y.len();
        let mut p0 = Vec::with_capacity(n + 1);
        let mut p1 = Vec::with_capacity(n + 1);
        let mut p2 = Vec::with_capacity(n + 1);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        p0.push(0.0);
        p1.push(0.0);
        p2.push(0.0);
        for (&yj, &aj) in y.iter().zip(&a) {
            s0 += aj;
            s1 += aj * yj;
            s2 += aj * yj * yj;
            p0.push(s0);
            p1.push(s1);
            p2.push(s2);
        }
        Self { y, p0, p1, p2, y_lo, y_hi, symmetric }
    }

    /// Fiber midpoint heights, ascending.
    pub fn fiber_heights(&self) -> &[f64] {
        &self.y
    }

    pub fn fiber_count(&self) -> usize {
        self.y.len()
    }

    pub fn area(&self) -> f64 {
        self.p0[self.y.len()]
    }

    /// Second moment of the fiber areas about `y = 0`.
    pub fn second_moment(&self) -> f64 {
        self.p2[self.y.len()]
    }

    fn band(&self, from: usize, to: usize, y0: f64) -> Band {
        if to <= from {
            return Band::default();
        }
        let s0 = self.p0[to] - self.p0[from];
        let s1 = self.p1[to] - self.p1[from];
        let s2 = self.p2[to] - self.p2[from];
        Band {
            area: s0,
            first: s1 - y0 * s0,
            second: s2 - 2.0 * y0 * s1 + y0 * y0 * s0,
        }
    }

    /// Splits fibers into (lower plateau, elastic core, upper plateau) for
    /// curvature `k > 0` about `y0`.
    fn bands(&self, mat: &BilinearMaterial, k: f64, y0: f64) -> [Band; 3] {
        let n = self.y.len();
        if k == 0.0 {
            return [Band::default(), self.band(0, n, y0), Band::default()];
        }
        let yl = mat.eps_l() / k;
        let a = self.y.partition_point(|&y| y - y0 < -yl);
        let b = self.y.partition_point(|&y| y - y0 <= yl);
        [self.band(0, a, y0), self.band(a, b, y0), self.band(b, n, y0)]
    }

    /// Net axial force at curvature `kappa` with neutral axis at `y0`.
    pub fn axial(&self, mat: &BilinearMaterial, kappa: f64, y0: f64) -> f64 {
        let k = kappa.abs();
        let [lower, core, upper] = self.bands(mat, k, y0);
        let jump = (mat.e() - mat.en()) * mat.eps_l();
        let n = mat.e() * k * core.first + (jump * upper.area + mat.en() * k * upper.first)
            + (-jump * lower.area + mat.en() * k * lower.first);
        if kappa < 0.0 {
            -n
        } else {
            n
        }
    }

    /// Bending moment about the neutral axis `y0`.
    pub fn moment(&self, mat: &BilinearMaterial, kappa: f64, y0: f64) -> f64 {
        let k = kappa.abs();
        let [lower, core, upper] = self.bands(mat, k, y0);
        let jump = (mat.e() - mat.en()) * mat.eps_l();
        let m = mat.e() * k * core.second
            + (jump * upper.first + mat.en() * k * upper.second)
            + (-jump * lower.first + mat.en() * k * lower.second);
        if kappa < 0.0 {
            -m
        } else {
            m
        }
    }

    /// Strain energy per unit length.
    pub fn energy(&self, mat: &BilinearMaterial, kappa: f64, y0: f64) -> f64 {
        let k = kappa.abs();
        let [lower, core, upper] = self.bands(mat, k, y0);
        let (e, en, el) = (mat.e(), mat.en(), mat.eps_l());
        // plateau energy density: (En - E) el^2 / 2 + (E - En) el k |d| + En k^2 d^2 / 2
        let plateau = |b: Band, abs_first: f64| {
            0.5 * (en - e) * el * el * b.area + (e - en) * el * k * abs_first + 0.5 * en * k * k * b.second
        };
        0.5 * e * k * k * core.second + plateau(upper, upper.first) + plateau(lower, -lower.first)
    }

    /// Solves axial equilibrium for `y0`, then evaluates the moment.
    pub fn solve(&self, mat: &BilinearMaterial, kappa: f64) -> Result<SectionState, MechanicsError> {
        if !kappa.is_finite() {
            return Err(MechanicsError::Domain(format!("non-finite curvature {kappa}")));
        }
        if kappa == 0.0 {
            return Ok(SectionState { kappa, y0: 0.0, moment: 0.0, axial: 0.0 });
        }
        let k = kappa.abs();
        let y0 = if self.symmetric {
            0.5 * (self.y_lo + self.y_hi)
        } else {
            // axial force falls as the neutral axis rises
            let b = bisect_increasing(|y0| -self.axial(mat, k, y0), 0.0, self.y_lo, self.y_hi, Tolerance::TIGHT);
            b.mid()
        };
        Ok(SectionState {
            kappa,
            y0,
            moment: self.moment(mat, kappa, y0),
            axial: self.axial(mat, kappa, y0),
        })
    }

    /// Axial residual accepted at a converged state.
    pub fn axial_tolerance(&self, mat: &BilinearMaterial) -> f64 {
        1e-9 * mat.e() * self.area()
    }
}

/// Moment of an arbitrary layered section at curvature `kappa`.
pub fn section_moment_general(
    mat: &BilinearMaterial,
    section: &CrossSection,
    kappa: f64,
    fibers: usize,
) -> Result<SectionState, MechanicsError> {
    if fibers < 1000 {
        return Err(MechanicsError::Domain(format!("at least 1000 fibers required, got {fibers}")));
    }
    FiberSection::new(section, fibers)?.solve(mat, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat() -> BilinearMaterial {
        BilinearMaterial::new(60e9, 20e9, 0.01).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    /// Direct midpoint sum over fibers, no prefix sums.
    fn brute_rect(m: &BilinearMaterial, t: f64, w: f64, kappa: f64, n: usize) -> (f64, f64) {
        let dy = t / n as f64;
        let (mut mom, mut en) = (0.0, 0.0);
        for j in 0..n {
            let y = -0.5 * t + (j as f64 + 0.5) * dy;
            mom += m.stress(kappa * y).unwrap() * y * w * dy;
            en += m.strain_energy_density(kappa * y).unwrap() * w * dy;
        }
        (mom, en)
    }

    #[test]
    fn zero_curvature_is_stress_free() {
        assert_eq!(section_moment(&mat(), 20e-6, 1e-3, 0.0).unwrap(), 0.0);
        let s = section_moment_general(&mat(), &CrossSection::rectangle(20e-6, 1e-3).unwrap(), 0.0, 1000).unwrap();
        assert_eq!((s.moment, s.y0), (0.0, 0.0));
    }

    #[test]
    fn linear_regime_hand_value() {
        // I = w t^3 / 12 = 6.667e-19 m^4, M = E I kappa = 4.0e-6 N·m
        let m = section_moment(&mat(), 20e-6, 1e-3, 100.0).unwrap();
        assert!(rel(m, 60e9 * 1e-3 * 20e-6f64.powi(3) / 12.0 * 100.0) < 1e-12);
        assert!(rel(m, 4.0e-6) < 1e-12);
    }

    #[test]
    fn plateau_regime_matches_fiber_sum() {
        let m = mat();
        let (t, w) = (30e-6, 2e-3);
        let kappa_l = m.eps_l() / (0.5 * t);
        let kappa = 3.0 * kappa_l;
        let (mom, en) = brute_rect(&m, t, w, kappa, 10_000);
        assert!(rel(section_moment(&m, t, w, kappa).unwrap(), mom) < 1e-6);
        assert!(rel(section_energy(&m, t, w, kappa).unwrap(), en) < 1e-6);
    }

    #[test]
    fn continuous_across_knee() {
        let m = mat();
        let t = 20e-6;
        let kl = m.eps_l() / (0.5 * t);
        let a = section_moment(&m, t, 1e-3, kl * (1.0 - 1e-12)).unwrap();
        let b = section_moment(&m, t, 1e-3, kl * (1.0 + 1e-12)).unwrap();
        assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn negative_geometry_rejected() {
        assert!(matches!(section_moment(&mat(), -1.0, 1.0, 1.0), Err(MechanicsError::Domain(_))));
        assert!(matches!(section_moment(&mat(), 1.0, -1.0, 1.0), Err(MechanicsError::Domain(_))));
    }

    #[test]
    fn odd_in_curvature() {
        let m = mat();
        let s = section_moment(&m, 25e-6, 1e-3, 2500.0).unwrap();
        assert_eq!(section_moment(&m, 25e-6, 1e-3, -2500.0).unwrap(), -s);
    }

    #[test]
    fn fiber_section_matches_closed_form_rectangle() {
        let m = mat();
        let fs = FiberSection::rectangle(20e-6, 1e-3, 10_000).unwrap();
        for kappa in [100.0, 1000.0, 3000.0, 10_000.0] {
            let st = fs.solve(&m, kappa).unwrap();
            assert_eq!(st.y0, 0.0);
            assert!(rel(st.moment, section_moment(&m, 20e-6, 1e-3, kappa).unwrap()) < 1e-6);
            assert!(rel(fs.energy(&m, kappa, 0.0), section_energy(&m, 20e-6, 1e-3, kappa).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn prefix_sums_equal_direct_fiber_loop() {
        let m = mat();
        let sec = CrossSection::tee(20e-6, 0.3e-3, 10e-6, 1e-3).unwrap();
        let fs = FiberSection::new(&sec, 1000).unwrap();
        let (kappa, y0) = (4000.0, 3e-6);
        let dy = sec.height() / 1000.0;
        let (mut n, mut mom, mut en) = (0.0, 0.0, 0.0);
        for j in 0..1000 {
            let y = -0.5 * sec.height() + (j as f64 + 0.5) * dy;
            let a = sec.width_at(y) * dy;
            let eps = kappa * (y - y0);
            n += m.stress(eps).unwrap() * a;
            mom += m.stress(eps).unwrap() * (y - y0) * a;
            en += m.strain_energy_density(eps).unwrap() * a;
        }
        assert!((fs.axial(&m, kappa, y0) - n).abs() < 1e-9 * mom.abs() / sec.height());
        assert!(rel(fs.moment(&m, kappa, y0), mom) < 1e-10);
        assert!(rel(fs.energy(&m, kappa, y0), en) < 1e-10);
    }

    #[test]
    fn tee_section_shifts_neutral_axis_toward_flange() {
        let m = mat();
        let sec = CrossSection::tee(20e-6, 0.3e-3, 10e-6, 1e-3).unwrap();
        let fs = FiberSection::new(&sec, 4000).unwrap();
        let st = fs.solve(&m, 500.0).unwrap();
        // linear regime: y0 is the area centroid
        let h = sec.height();
        let centroid = (0.3e-3 * 20e-6 * (-0.5 * h + 10e-6) + 1e-3 * 10e-6 * (0.5 * h - 5e-6)) / sec.area();
        assert!((st.y0 - centroid).abs() < 1e-3 * h);
        assert!(st.axial.abs() <= fs.axial_tolerance(&m));
    }

    #[test]
    fn zero_width_section_is_degenerate() {
        let sec = CrossSection::rectangle(10e-6, 0.0).unwrap();
        assert!(matches!(FiberSection::new(&sec, 1000), Err(MechanicsError::DegenerateSection(_))));
    }

    #[test]
    fn general_requires_enough_fibers() {
        let sec = CrossSection::rectangle(10e-6, 1e-3).unwrap();
        assert!(section_moment_general(&mat(), &sec, 1.0, 999).is_err());
    }
}
