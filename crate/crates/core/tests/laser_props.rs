use nitiflex::lasercal::{calibration_grid, fit_etch_rates, select_setting, EtchSample, LaserConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const RATES: [f64; 5] = [150.0, 175.0, 200.0, 225.0, 250.0];

fn true_rate(khz: f64) -> f64 {
    0.4 + 0.003 * khz
}

fn synthetic(seed: u64, sd: f64) -> Vec<EtchSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut out = Vec::new();
    for r in RATES {
        for p in 1..=14u32 {
            out.push(EtchSample {
                rep_rate_khz: r,
                passes: p,
                depth_um: 0.3 + true_rate(r) * p as f64 + noise.sample(&mut rng),
            });
        }
    }
    out
}

proptest! {
    #[test]
    fn grid_cell_count(n_rates in 1usize..6, first in 1u32..5, span in 0u32..12, side in 20.0..300.0f64) {
        let rates: Vec<f64> = (0..n_rates).map(|i| 100.0 + 25.0 * i as f64).collect();
        let g = calibration_grid(&rates, first..=first + span, side, 5.0, 50.0).unwrap();
        prop_assert_eq!(g.cells.len(), n_rates * (span as usize + 1));
        prop_assert_eq!(g.toolpath.polylines.len(), g.cells.len());
        for c in &g.cells {
            prop_assert_eq!(c.lines, (side / 5.0 + 1e-9).floor() as usize + 1);
        }
    }

    #[test]
    fn noiseless_fit_is_exact(slope in 0.05..3.0f64, icpt in 0.0..1.0f64, lo in 1u32..4, n in 3u32..12) {
        let samples: Vec<EtchSample> = (lo..lo + n)
            .map(|p| EtchSample { rep_rate_khz: 200.0, passes: p, depth_um: icpt + slope * p as f64 })
            .collect();
        let f = fit_etch_rates(&samples).unwrap()[0];
        prop_assert!((f.rate_um_per_pass - slope).abs() < 1e-9 * slope.max(1.0));
        prop_assert!((f.intercept_um - icpt).abs() < 1e-8);
        prop_assert!((f.r2 - 1.0).abs() < 1e-9);
        prop_assert!(f.rate_ci95 < 1e-6 * slope);
    }

    #[test]
    fn fit_is_deterministic_and_order_free(seed in any::<u64>()) {
        let a = synthetic(seed, 0.3);
        let mut b = a.clone();
        b.reverse();
        let fa = fit_etch_rates(&a).unwrap();
        prop_assert_eq!(&fa, &fit_etch_rates(&a).unwrap());
        let fb = fit_etch_rates(&b).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            prop_assert_eq!(x.rep_rate_khz, y.rep_rate_khz);
            prop_assert!((x.rate_um_per_pass - y.rate_um_per_pass).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_is_closest_feasible(seed in any::<u64>(), target in 2.0..12.0f64) {
        let fits = fit_etch_rates(&synthetic(seed, 0.1)).unwrap();
        let cfg = LaserConfig::default();
        let s = select_setting(&fits, target, &cfg).unwrap();
        let best = (s.depth_per_layer_um - target).abs();
        for f in &fits {
            for p in 1..=cfg.max_passes {
                if f.rate_ci95 * p as f64 <= 0.2 * target {
                    prop_assert!(best <= (f.rate_um_per_pass * p as f64 - target).abs() + 1e-12);
                }
            }
        }
    }
}

#[test]
fn ci_coverage_per_rate() {
    let mut hits = [0usize; 5];
    for seed in 0..200 {
        let fits = fit_etch_rates(&synthetic(seed, 0.3)).unwrap();
        for (k, f) in fits.iter().enumerate() {
            hits[k] += usize::from((f.rate_um_per_pass - true_rate(f.rep_rate_khz)).abs() <= f.rate_ci95);
        }
    }
    // nominal 95%; 200 draws put 90% more than three standard errors away
    for h in hits {
        assert!(h >= 180, "{hits:?}");
    }
}
