use eyescreen::edgedetect::EdgeMask;
use eyescreen::pupilgeom::{centroid, extract_closed_contours, locate_pupil, LocateConfig};
use eyescreen::synthgen::{synth_eye, EyeLevels, SynthEyeSpec};
use proptest::prelude::*;

fn edge_mask(side: usize) -> impl Strategy<Value = EdgeMask> {
    prop::collection::vec(prop::bool::weighted(0.35), side * side)
        .prop_map(move |e| EdgeMask::new(side, side, e).unwrap())
}

fn eye(seed: u64) -> SynthEyeSpec {
    SynthEyeSpec {
        width: 160,
        height: 128,
        pupil_center: (81.4, 62.7),
        pupil_radius: 18.0,
        iris_radius: 42.0,
        eye_center: (80.0, 64.0),
        sclera_radii: (75.0, 55.0),
        levels: EyeLevels::default(),
        noise_sigma: 8.0,
        seed,
        supersample: 2,
    }
}

proptest! {
    #[test]
    fn contours_are_closed_chains(edges in edge_mask(24), min_len in 1usize..12) {
        for c in extract_closed_contours(&edges, min_len) {
            prop_assert!(c.closed);
            prop_assert!(c.length() >= min_len);
            prop_assert!(c.is_chain_consistent());
        }
    }

    #[test]
    fn centroid_is_translation_equivariant(
        region in prop::collection::vec((0usize..50, 0usize..50), 1..60),
        tx in 0usize..100,
        ty in 0usize..100,
    ) {
        let (cx, cy) = centroid::<f64>(&region).unwrap();
        let moved: Vec<_> = region.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
        let (mx, my) = centroid::<f64>(&moved).unwrap();
        prop_assert!((mx - cx - tx as f64).abs() < 1e-9);
        prop_assert!((my - cy - ty as f64).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn locate_is_deterministic(seed in any::<u64>()) {
        let img = synth_eye(&eye(seed)).unwrap().image;
        let cfg = LocateConfig::default();
        let a = locate_pupil(&img, &cfg);
        let b = locate_pupil(&img, &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "outcomes differ"),
        }
    }
}
