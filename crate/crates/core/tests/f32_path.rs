use eyescreen::evalmetrics::quality_report;
use eyescreen::pupilgeom::{locate_pupil, LocateConfig};
use eyescreen::ringrefraction::{measure_refraction, RefractionModel, RingConfig};
use eyescreen::seglosses::{combined_loss, random_instance, LossWeights, ProbMap};
use eyescreen::synthgen::{synth_eye, synth_ring, EyeLevels, SynthEyeSpec, SynthRingSpec};
use eyescreen::{GrayImage, GrayImageF32};

fn to_f32(img: &GrayImage) -> GrayImageF32 {
    GrayImageF32::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| v as f32).collect(),
    )
    .unwrap()
}

#[test]
fn pupil_location_in_single_precision() {
    let spec = SynthEyeSpec {
        width: 200,
        height: 160,
        pupil_center: (98.3, 83.1),
        pupil_radius: 22.0,
        iris_radius: 50.0,
        eye_center: (100.0, 80.0),
        sclera_radii: (90.0, 70.0),
        levels: EyeLevels::default(),
        noise_sigma: 8.0,
        seed: 5,
        supersample: 4,
    };
    let img = to_f32(&synth_eye(&spec).unwrap().image);
    let est = locate_pupil(&img, &LocateConfig::default()).unwrap();
    let err = ((est.center.0 as f64 - 98.3).powi(2) + (est.center.1 as f64 - 83.1).powi(2)).sqrt();
    assert!(err < 1.0, "{err}");
}

#[test]
fn ring_measurement_in_single_precision() {
    let spec = SynthRingSpec {
        diopters: -4.75,
        ..SynthRingSpec::default()
    };
    let img = to_f32(&synth_ring(&spec).unwrap().image);
    let m = RefractionModel::<f32>::new(0.1136, 24.4738, 0.1).unwrap();
    let r = measure_refraction(&img, &m, &RingConfig::default()).unwrap();
    assert!((r.diopters + 4.75).abs() <= 0.25, "{}", r.diopters);
}

#[test]
fn losses_and_quality_in_single_precision() {
    let (p, t) = random_instance(3, 8, 8, 4).unwrap();
    let p32 = ProbMap::<f32>::from_raw(8, 8, 4, p.values().iter().map(|&v| v as f32).collect()).unwrap();
    let cfg = LossWeights::default();
    let a = combined_loss(&p, &t, &cfg, 10, 150);
    let b = combined_loss(&p32, &t, &cfg, 10, 150);
    match (a, b) {
        (Ok(a), Ok(b)) => assert!((a.total - b.total as f64).abs() <= 1e-4 * a.total.max(1.0)),
        (Err(_), Err(_)) => {}
        _ => panic!("precisions disagree on validity"),
    }
    let img = GrayImage::from_fn(16, 16, |x, y| ((x * 13 + y * 7) % 256) as f64).unwrap();
    let q64 = quality_report(&img).unwrap();
    let q32 = quality_report(&to_f32(&img)).unwrap();
    assert!((q64.brightness - q32.brightness as f64).abs() < 1e-3);
    assert!((q64.frequency_sharpness - q32.frequency_sharpness as f64).abs() <= 1e-4 * q64.frequency_sharpness);
}
