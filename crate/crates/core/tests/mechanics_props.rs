use nitiflex::material::BilinearMaterial;
use nitiflex::mechanics::{
    castigliano_residual, section_moment, torque, torque_curve, torque_profile_numerical, torque_rect_analytical,
    HingeSpec, Sides, SolverOptions, ThicknessProfile,
};
use proptest::prelude::*;

fn material() -> impl Strategy<Value = BilinearMaterial> {
    (40e9..80e9f64, 0.1..0.6f64, 0.006..0.015f64)
        .prop_map(|(e, r, el)| BilinearMaterial::new(e, r * e, el).unwrap())
}

fn rect(t: f64, l: f64, m: BilinearMaterial) -> HingeSpec {
    HingeSpec::new(ThicknessProfile::rectangular(t, l).unwrap(), 2e-3, m, 100e-6).unwrap()
}

fn arc(t_min: f64, m: BilinearMaterial) -> HingeSpec {
    HingeSpec::new(ThicknessProfile::arc(t_min, 1e-3, Sides::Both, 400e-6).unwrap(), 2e-3, m, 100e-6).unwrap()
}

fn brute_moment(m: &BilinearMaterial, t: f64, w: f64, kappa: f64) -> f64 {
    let n = 10_000;
    let dy = t / n as f64;
    (0..n)
        .map(|i| {
            let y = -0.5 * t + (i as f64 + 0.5) * dy;
            let e = kappa * y;
            let a = e.abs();
            let s = if a <= m.eps_l() {
                m.e() * a
            } else {
                m.e() * m.eps_l() + m.en() * (a - m.eps_l())
            };
            s.copysign(e) * y * w * dy
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_fiber_sum(
        m in material(),
        t in 10e-6..100e-6f64,
        w in 0.1e-3..5e-3f64,
        // peak strain from a tenth of the knee to five times it
        ratio in 0.1..5.0f64,
    ) {
        let kappa = ratio * m.eps_l() / (0.5 * t);
        let cf = section_moment(&m, t, w, kappa).unwrap();
        let bf = brute_moment(&m, t, w, kappa);
        prop_assert!((cf - bf).abs() / bf < 1e-6);
    }

    #[test]
    fn linear_regime_scaling(m in material(), t in 10e-6..40e-6f64, l in 200e-6..800e-6f64) {
        // stay below the knee after doubling t
        let theta = 0.4 * m.eps_l() * 2.0 * l / (2.0 * t);
        let base = torque_rect_analytical(&rect(t, l, m), theta).unwrap().torque;
        let thick = torque_rect_analytical(&rect(2.0 * t, l, m), theta).unwrap().torque;
        let long = torque_rect_analytical(&rect(t, 2.0 * l, m), theta).unwrap().torque;
        let wide = HingeSpec::new(ThicknessProfile::rectangular(t, l).unwrap(), 4e-3, m, 100e-6).unwrap();
        let wide = torque_rect_analytical(&wide, theta).unwrap().torque;
        prop_assert!((thick / base - 8.0).abs() < 1e-12);
        prop_assert!((long / base - 0.5).abs() < 1e-12);
        prop_assert!((wide / base - 2.0).abs() < 1e-12);
    }

    #[test]
    fn odd_extension(m in material(), t in 10e-6..40e-6f64, theta in 0.0..1.0f64) {
        let h = rect(t, 400e-6, m);
        let a = torque(&h, theta, SolverOptions::default()).unwrap();
        let b = torque(&h, -theta, SolverOptions::default()).unwrap();
        prop_assert_eq!(b.torque, -a.torque);
        prop_assert_eq!(b.energy, a.energy);
    }

    #[test]
    fn rect_monotone_in_angle_and_thickness(m in material(), t in 10e-6..40e-6f64, dt in 1e-6..5e-6f64) {
        let thin = torque_curve(&rect(t, 400e-6, m), 0.9, 41, SolverOptions::default()).unwrap();
        let thick = torque_curve(&rect(t + dt, 400e-6, m), 0.9, 41, SolverOptions::default()).unwrap();
        prop_assert!(thin.check_invariants().is_ok());
        for w in thin.samples.windows(2) {
            prop_assert!(w[1].torque > w[0].torque && w[1].energy > w[0].energy);
        }
        for (a, b) in thin.samples.iter().zip(&thick.samples).skip(1) {
            prop_assert!(b.torque > a.torque);
        }
    }

    #[test]
    fn tangent_softens_after_knee(m in material(), t in 15e-6..40e-6f64) {
        let l = 400e-6;
        let h = rect(t, l, m);
        let knee = 2.0 * l * m.eps_l() / t;
        let dth = 1e-4;
        let slope = |th: f64| {
            let a = torque_rect_analytical(&h, th - dth).unwrap().torque;
            let b = torque_rect_analytical(&h, th + dth).unwrap().torque;
            (b - a) / (2.0 * dth)
        };
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let th = knee * (1.0 + 0.1 * k as f64);
            let s = slope(th);
            prop_assert!(s <= prev * (1.0 + 1e-9));
            prev = s;
        }
        // below the knee the slope is E I / L
        let ei_l = m.e() * 2e-3 * t.powi(3) / 12.0 / l;
        prop_assert!((slope(0.5 * knee) - ei_l).abs() / ei_l < 1e-6);
    }

    #[test]
    fn castigliano_rectangular(m in material(), t in 15e-6..40e-6f64, theta in 0.05..0.9f64) {
        let h = rect(t, 400e-6, m);
        let r = castigliano_residual(&h, theta, 1e-5, SolverOptions::default()).unwrap();
        prop_assert!(r <= 1e-4, "residual {r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn arc_monotone_and_path_equivalent(m in material(), t in 12e-6..30e-6f64) {
        let opts = SolverOptions::default();
        let thin = torque_curve(&arc(t, m), 40f64.to_radians(), 9, opts).unwrap();
        let thick = torque_curve(&arc(t + 3e-6, m), 40f64.to_radians(), 9, opts).unwrap();
        prop_assert!(thin.check_invariants().is_ok());
        for (a, b) in thin.samples.iter().zip(&thick.samples).skip(1) {
            prop_assert!(b.torque > a.torque);
        }
        let h = rect(t, 400e-6, m);
        for k in 1..=4 {
            let th = 10f64.to_radians() * k as f64;
            let a = torque_rect_analytical(&h, th).unwrap().torque;
            let n = torque_profile_numerical(&h, th, opts).unwrap().torque;
            prop_assert!((a - n).abs() / a < 1e-5);
        }
    }
}

#[test]
fn knee_location() {
    let m = BilinearMaterial::new(60e9, 20e9, 0.01).unwrap();
    let (t, l) = (20e-6, 400e-6);
    let h = rect(t, l, m);
    let knee = 2.0 * l * m.eps_l() / t;
    let c = torque_curve(&h, 40f64.to_radians(), 81, SolverOptions::default()).unwrap();
    assert!(c.check_invariants().is_ok());
    let ei_l = m.e() * 2e-3 * t.powi(3) / 12.0 / l;
    for p in &c.samples {
        let linear = ei_l * p.theta;
        if p.theta <= knee {
            assert!((p.torque - linear).abs() <= 1e-12 * linear.max(1e-30));
        } else {
            assert!(p.torque < linear);
        }
    }
}

#[test]
fn thinner_circular_hinge_is_weaker() {
    let m = BilinearMaterial::new(60e9, 20e9, 0.01).unwrap();
    let opts = SolverOptions::default();
    let c15 = torque_curve(&arc(15e-6, m), 40f64.to_radians(), 21, opts).unwrap();
    let c20 = torque_curve(&arc(20e-6, m), 40f64.to_radians(), 21, opts).unwrap();
    for (a, b) in c15.samples.iter().zip(&c20.samples).skip(1) {
        assert!(a.torque < b.torque);
    }
}
