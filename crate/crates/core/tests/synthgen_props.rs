use eyescreen::synthgen::{corpus_spec, render, CorpusConfig, CorpusKind, SynthSpec, SynthTruth};
use proptest::prelude::*;

fn config(kind: CorpusKind, seed: u64) -> CorpusConfig {
    let mut cfg = CorpusConfig {
        kind,
        seed,
        ..CorpusConfig::default()
    };
    cfg.eye.width = 200;
    cfg.eye.height = 160;
    cfg.eye.sclera_radii = (90.0, 70.0);
    cfg.eye.pupil_radius = (8.0, 12.0);
    cfg.eye.center_jitter = 10.0;
    cfg.eye.supersample = 2;
    cfg.ring.noise_sigma = 8.0;
    cfg
}

fn kind() -> impl Strategy<Value = CorpusKind> {
    prop_oneof![Just(CorpusKind::Eye), Just(CorpusKind::Ring)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rendering_is_a_pure_function_of_the_spec(k in kind(), seed in any::<u64>(), index in 0usize..1000) {
        let cfg = config(k, seed);
        let spec = corpus_spec(&cfg, index);
        prop_assert_eq!(&spec, &corpus_spec(&cfg, index));
        let (a, ta) = render(&spec).unwrap();
        let (b, tb) = render(&spec).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn truth_is_taken_from_the_spec(k in kind(), seed in any::<u64>(), index in 0usize..1000) {
        let cfg = config(k, seed);
        let spec = corpus_spec(&cfg, index);
        let (_, truth) = render(&spec).unwrap();
        match (&spec, &truth) {
            (SynthSpec::Eye(s), SynthTruth::Eye(t)) => {
                prop_assert_eq!(t.pupil_center, s.pupil_center);
                prop_assert_eq!(t.pupil_radius, s.pupil_radius);
                prop_assert_eq!(t.iris_radius, s.iris_radius);
            }
            (SynthSpec::Ring(s), SynthTruth::Ring(t)) => {
                prop_assert_eq!(t.diopters, s.diopters);
                prop_assert_eq!(t.feature, s.model.slope * s.diopters + s.model.intercept);
                prop_assert_eq!(t.center, s.center);
            }
            _ => prop_assert!(false, "truth kind differs from spec kind"),
        }
    }
}
