//! Mechanics against independent brute-force integrations.

use nitiflex::material::BilinearMaterial;
use nitiflex::mechanics::{
    section_moment, section_moment_general, torque_profile_numerical, torque_rect_analytical, CrossSection,
    HingeSpec, Sides, SolverOptions, ThicknessProfile,
};

fn mat() -> BilinearMaterial {
    BilinearMaterial::new(60e9, 20e9, 0.01).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Bilinear stress written out from the law, not taken from the library.
fn sigma(m: &BilinearMaterial, eps: f64) -> f64 {
    let a = eps.abs();
    let s = if a <= m.eps_l() {
        m.e() * a
    } else {
        m.e() * m.eps_l() + m.en() * (a - m.eps_l())
    };
    s.copysign(eps)
}

fn energy_density(m: &BilinearMaterial, eps: f64) -> f64 {
    let a = eps.abs();
    if a <= m.eps_l() {
        0.5 * m.e() * a * a
    } else {
        let z = a - m.eps_l();
        0.5 * m.e() * m.eps_l() * m.eps_l() + m.e() * m.eps_l() * z + 0.5 * m.en() * z * z
    }
}

/// Trapezoid rule over `[a, b]` with `n` intervals.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

#[test]
fn tee_section_against_trapezoid() {
    let m = mat();
    let (web_t, web_w, fl_t, fl_w) = (20e-6, 0.3e-3, 10e-6, 1.0e-3);
    let h = web_t + fl_t;
    let width = |y: f64| if y < -0.5 * h + web_t { web_w } else { fl_w };
    let kappa = 3000.0; // peak strain about 5%, deep in the plateau
    let n = 1_000_000;
    // web/flange junction falls on a node: 2/3 of the height
    let axial = |y0: f64| trapezoid(|y| sigma(&m, kappa * (y - y0)) * width(y), -0.5 * h, 0.5 * h, n);
    let (mut lo, mut hi) = (-0.5 * h, 0.5 * h);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if axial(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y0 = 0.5 * (lo + hi);
    let oracle = trapezoid(
        |y| sigma(&m, kappa * (y - y0)) * (y - y0) * width(y),
        -0.5 * h,
        0.5 * h,
        n,
    );
    let sec = CrossSection::tee(web_t, web_w, fl_t, fl_w).unwrap();
    let st = section_moment_general(&m, &sec, kappa, 30_000).unwrap();
    assert!(rel(st.moment, oracle) < 1e-4, "{} vs {oracle}", st.moment);
    assert!((st.y0 - y0).abs() < 1e-4 * h, "{} vs {y0}", st.y0);
    // neutral axis moves toward the wide flange
    assert!(st.y0 > 0.0);
}

#[test]
fn rectangular_hinge_at_40_degrees() {
    let m = mat();
    let (t, w) = (30e-6, 2e-3);
    let theta = 40f64.to_radians();
    let l = theta * t / (2.0 * 0.02);
    let h = HingeSpec::new(ThicknessProfile::rectangular(t, l).unwrap(), w, m, 100e-6).unwrap();
    let r = torque_rect_analytical(&h, theta).unwrap();
    assert!(rel(r.eps_peak, 0.02) < 1e-12);

    let kappa = theta / l;
    let n = 100_000;
    let dy = t / n as f64;
    let (mut mo, mut u) = (0.0, 0.0);
    for i in 0..n {
        let y = -0.5 * t + (i as f64 + 0.5) * dy;
        mo += sigma(&m, kappa * y) * y * w * dy;
        u += energy_density(&m, kappa * y) * w * dy;
    }
    assert!(rel(r.torque, mo) < 1e-4, "{} vs {mo}", r.torque);
    assert!(rel(r.energy, u * l) < 1e-4);
}

/// Closed-form section per station, bisection on curvature per station,
/// bisection on the moment overall.
fn dense_station_torque(hinge: &HingeSpec, theta: f64, stations: usize) -> f64 {
    let m = hinge.material();
    let l = hinge.length();
    let ds = l / stations as f64;
    let t: Vec<f64> = (0..stations)
        .map(|i| hinge.profile().thickness_at((i as f64 + 0.5) * ds))
        .collect();
    let w = hinge.width();
    let kappa_for = |moment: f64, ti: f64| {
        let (mut lo, mut hi) = (0.0, 1.0);
        while section_moment(m, ti, w, hi).unwrap() < moment {
            hi *= 2.0;
        }
        for _ in 0..70 {
            let mid = 0.5 * (lo + hi);
            if section_moment(m, ti, w, mid).unwrap() < moment {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let angle = |moment: f64| t.iter().map(|&ti| kappa_for(moment, ti)).sum::<f64>() * ds;
    let (mut lo, mut hi) = (0.0, 1e-9);
    while angle(hi) < theta {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if angle(mid) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn arc_hinge_against_dense_stations() {
    let h = HingeSpec::new(
        ThicknessProfile::arc(20e-6, 1e-3, Sides::Both, 400e-6).unwrap(),
        2e-3,
        mat(),
        100e-6,
    )
    .unwrap();
    let theta = 40f64.to_radians();
    let oracle = dense_station_torque(&h, theta, 10_000);
    let r = torque_profile_numerical(&h, theta, SolverOptions::default()).unwrap();
    assert!(rel(r.torque, oracle) < 1e-3, "{} vs {oracle}", r.torque);
}

#[test]
fn arc_peak_strain_at_thinnest_station() {
    let h = HingeSpec::new(
        ThicknessProfile::arc(20e-6, 1e-3, Sides::Both, 400e-6).unwrap(),
        2e-3,
        mat(),
        100e-6,
    )
    .unwrap();
    let r = torque_profile_numerical(&h, 0.5, SolverOptions::default()).unwrap();
    // the middle station (index 100 of 201) sits exactly at L/2
    assert!(rel(r.eps_peak, r.kappa_ref * 20e-6 / 2.0) < 1e-12);
}
