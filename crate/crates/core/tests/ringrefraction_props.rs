use eyescreen::ringrefraction::{
    fit_ellipse, measure_refraction, refraction_from_feature, ring_feature, RaySample, RingConfig,
};
use eyescreen::synthgen::{synth_ring, SynthRingSpec};
use eyescreen::{RefractionModel, RingGeometry};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn ellipse_points(c: (f64, f64), a: f64, b: f64, theta: f64, n: usize, noise: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, noise.max(1e-300)).unwrap();
    (0..n)
        .map(|i| {
            let t = i as f64 * std::f64::consts::TAU / n as f64;
            let (x, y) = (a * t.cos(), b * t.sin());
            let (s, co) = theta.sin_cos();
            let jitter = |r: &mut rand_chacha::ChaCha20Rng| if noise > 0.0 { d.sample(r) } else { 0.0 };
            (
                c.0 + x * co - y * s + jitter(&mut rng),
                c.1 + x * s + y * co + jitter(&mut rng),
            )
        })
        .collect()
}

fn geometry(samples: Vec<(f64, f64)>, center: (f64, f64)) -> RingGeometry {
    RingGeometry {
        center,
        semi_major: 1.0,
        semi_minor: 1.0,
        rotation: 0.0,
        samples: samples
            .into_iter()
            .map(|p| RaySample {
                angle: 0.0,
                peak_point: p,
                width: 1.0,
                radius: 1.0,
                peak_value: 1.0,
            })
            .collect(),
        fit_residual: 0.0,
        seed_residual: 0.0,
        iterations: 0,
    }
}

proptest! {
    #[test]
    fn refinement_never_worsens_the_seed(
        a in 20.0..120.0f64,
        ratio in 0.5..1.0f64,
        theta in 0.0..std::f64::consts::PI,
        noise in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let pts = ellipse_points((150.0, 140.0), a, a * ratio, theta, 90, noise, seed);
        let g = fit_ellipse(&pts, true).unwrap();
        prop_assert!(g.fit_residual <= g.seed_residual);
    }

    #[test]
    fn inversion_undoes_forward(slope in prop_oneof![-5.0..-1e-3f64, 1e-3..5.0f64], intercept in -50.0..50.0f64, d in -20.0..20.0f64) {
        let m = RefractionModel::new(slope, intercept, 0.1).unwrap();
        let back = refraction_from_feature(m.forward(d), &m).unwrap();
        prop_assert!((back - d).abs() <= 1e-12 * (1.0 + d.abs() + (intercept / slope).abs()));
    }

    #[test]
    fn feature_follows_rigid_motion(
        pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..40),
        c in (-10.0..10.0f64, -10.0..10.0f64),
        t in (-500.0..500.0f64, -500.0..500.0f64),
        s in 0.1..10.0f64,
    ) {
        let base = ring_feature(&geometry(pts.clone(), c), 0.1);
        let moved = pts.iter().map(|p| (p.0 + t.0, p.1 + t.1)).collect();
        let shifted = ring_feature(&geometry(moved, (c.0 + t.0, c.1 + t.1)), 0.1);
        prop_assert!((shifted - base).abs() <= 1e-9 * base.max(1.0));
        let scaled_pts = pts.iter().map(|p| (p.0 * s, p.1 * s)).collect();
        let scaled = ring_feature(&geometry(scaled_pts, (c.0 * s, c.1 * s)), 0.1);
        prop_assert!((scaled - s * base).abs() <= 1e-9 * (s * base).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn measured_feature_ignores_integer_translation(dx in -20i32..20, dy in -20i32..20, d in -6.0..0.0f64) {
        let spec = SynthRingSpec { diopters: d, center: (150.3, 161.7), ..SynthRingSpec::default() };
        let moved = SynthRingSpec { center: (150.3 + dx as f64, 161.7 + dy as f64), ..spec.clone() };
        let m = RefractionModel::published();
        let cfg = RingConfig::default();
        let (ra, rb) = (synth_ring(&spec), synth_ring(&moved));
        prop_assume!(ra.is_ok() && rb.is_ok());
        let a = measure_refraction(&ra.unwrap().image, &m, &cfg).unwrap();
        let b = measure_refraction(&rb.unwrap().image, &m, &cfg).unwrap();
        prop_assert!((a.feature - b.feature).abs() <= 1e-6, "{} vs {}", a.feature, b.feature);
    }
}
