//! Photorefraction ring analysis: centroid seeding, radial scanning, ellipse
//! fitting, the ring feature and the linear diopter model.

mod ellipse;
mod model;
mod scan;

pub use ellipse::{fit_ellipse, normalize_axis_angle, MAX_HALVINGS, MAX_ITERATIONS, STEP_TOLERANCE};
pub use model::{
    fit_refraction_model, refraction_from_feature, Calibration, RefractionModel, DEFAULT_FEATURE_SCALE,
    PUBLISHED_INTERCEPT, PUBLISHED_SLOPE,
};
pub use scan::{radial_scan, scan_ray, RaySample, ScanConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{gaussian_blur, GrayImage};
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

/// Fitted ring ellipse with the ray samples it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry<T> {
    pub center: (T, T),
    pub semi_major: T,
    pub semi_minor: T,
    /// Major-axis angle in `[0, pi)`; 0 for circles.
    pub rotation: T,
    pub samples: Vec<RaySample<T>>,
    /// RMS foci residual of the final fit, px.
    pub fit_residual: T,
    /// RMS foci residual of the algebraic seed, px.
    pub seed_residual: T,
    pub iterations: usize,
}

impl<T: Real> RingGeometry<T> {
    /// Distance from the center to the ellipse along direction `phi`.
    pub fn polar_radius(&self, phi: T) -> T {
        let t = phi - self.rotation;
        let (a, b) = (self.semi_major, self.semi_minor);
        a * b / ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt()
    }

    /// Mean of `2 * polar_radius` over `n` uniform directions.
    pub fn mean_polar_diameter(&self, n: usize) -> T {
        let d: Vec<T> = (0..n)
            .map(|i| lit::<T>(2.0) * self.polar_radius(T::TAU() * from_usize::<T>(i) / from_usize::<T>(n)))
            .collect();
        pairwise_sum(&d) / from_usize::<T>(n)
    }
}

/// Otsu threshold over the 256-bin histogram of rounded intensities.
/// Foreground is `value > threshold`.
pub fn otsu_threshold<T: Real>(img: &GrayImage<T>) -> Result<T> {
    if img.is_empty() {
        return Err(Error::param("Otsu threshold of an empty image"));
    }
    let mut hist = [0usize; 256];
    for v in img.to_u8() {
        hist[v as usize] += 1;
    }
    let total = img.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best, mut best_t) = (-1.0f64, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    if best < 0.0 {
        // Single-valued histogram.
        best_t = img.to_u8()[0] as usize;
    }
    Ok(lit(best_t as f64))
}

/// Intensity-weighted first-moment centroid over pixels above `threshold`.
pub fn moments_centroid<T: Real>(img: &GrayImage<T>, threshold: T) -> Result<(T, T)> {
    let (mut m00, mut m10, mut m01) = (Vec::new(), Vec::new(), Vec::new());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y);
            if v > threshold {
                m00.push(v);
                m10.push(v * from_usize::<T>(x));
                m01.push(v * from_usize::<T>(y));
            }
        }
    }
    let m00 = pairwise_sum(&m00);
    if !(m00 > T::zero()) {
        return Err(Error::NotFound(format!("no pixel above threshold {threshold}")));
    }
    Ok((pairwise_sum(&m10) / m00, pairwise_sum(&m01) / m00))
}

/// Mean ring diameter in feature units: twice the mean distance from the
/// fitted center to the ray peaks, times `scale` (units per px). Geometry
/// without samples falls back to the fitted ellipse's mean polar diameter.
pub fn ring_feature<T: Real>(geom: &RingGeometry<T>, scale: T) -> T {
    if geom.samples.is_empty() {
        return geom.mean_polar_diameter(3600) * scale;
    }
    let d: Vec<T> = geom
        .samples
        .iter()
        .map(|s| lit::<T>(2.0) * (s.peak_point.0 - geom.center.0).hypot(s.peak_point.1 - geom.center.1))
        .collect();
    pairwise_sum(&d) / from_usize::<T>(d.len()) * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    /// Pre-scan Gaussian blur; 0 disables it.
    pub blur_sigma: f64,
    pub scan: ScanConfig,
    pub refine: bool,
    /// Re-run the scan from the fitted center before the final fit.
    pub rescan: bool,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            scan: ScanConfig::default(),
            refine: true,
            rescan: true,
        }
    }
}

impl RingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::param(format!(
                "blur_sigma must be non-negative, got {}",
                self.blur_sigma
            )));
        }
        self.scan.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Moments,
    /// No pixel exceeded the binarization threshold.
    ImageCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingDiagnostics<T> {
    pub threshold: T,
    pub seed: (T, T),
    pub seed_source: SeedSource,
    pub n_rays: usize,
    pub n_valid_rays: usize,
    pub fit_residual: T,
    pub seed_residual: T,
    pub mean_width: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefractionMeasurement<T> {
    pub diopters: T,
    /// Ring feature in model units.
    pub feature: T,
    pub geometry: RingGeometry<T>,
    pub diagnostics: RingDiagnostics<T>,
}

fn scan_and_fit<T: Real>(img: &GrayImage<T>, center: (T, T), cfg: &RingConfig) -> Result<RingGeometry<T>> {
    let samples = radial_scan(img, center, &cfg.scan).map_err(|e| e.at_stage("radial_scan"))?;
    let points: Vec<(T, T)> = samples.iter().map(|s| s.peak_point).collect();
    let mut geom = fit_ellipse(&points, cfg.refine).map_err(|e| e.at_stage("fit_ellipse"))?;
    geom.samples = samples;
    Ok(geom)
}

/// Full ring pipeline: blur, Otsu binarization, moments seed, radial scan,
/// ellipse fit, ring feature and model inversion. Errors are tagged with the
/// stage that raised them.
pub fn measure_refraction<T: Real>(
    img: &GrayImage<T>,
    model: &RefractionModel<T>,
    cfg: &RingConfig,
) -> Result<RefractionMeasurement<T>> {
    cfg.validate()?;
    model.validate()?;
    let blurred = if cfg.blur_sigma > 0.0 {
        gaussian_blur(img, lit(cfg.blur_sigma)).map_err(|e| e.at_stage("gaussian_blur"))?
    } else {
        img.clone()
    };
    let threshold = otsu_threshold(&blurred).map_err(|e| e.at_stage("binarize"))?;
    let (seed, seed_source) = match moments_centroid(&blurred, threshold) {
        Ok(c) => (c, SeedSource::Moments),
        Err(Error::NotFound(_)) => (
            (
                from_usize::<T>(img.width()) / lit(2.0),
                from_usize::<T>(img.height()) / lit(2.0),
            ),
            SeedSource::ImageCenter,
        ),
        Err(e) => return Err(e.at_stage("moments_centroid")),
    };
    let mut geom = scan_and_fit(&blurred, seed, cfg)?;
    if cfg.rescan && blurred.bilinear(geom.center.0, geom.center.1).is_some() {
        // A failed rescan keeps the first fit.
        if let Ok(g) = scan_and_fit(&blurred, geom.center, cfg) {
            geom = g;
        }
    }
    let feature = ring_feature(&geom, model.feature_scale);
    let diopters = refraction_from_feature(feature, model).map_err(|e| e.at_stage("refraction_from_feature"))?;
    let widths: Vec<T> = geom.samples.iter().map(|s| s.width).collect();
    let diagnostics = RingDiagnostics {
        threshold,
        seed,
        seed_source,
        n_rays: cfg.scan.n_rays,
        n_valid_rays: geom.samples.len(),
        fit_residual: geom.fit_residual,
        seed_residual: geom.seed_residual,
        mean_width: pairwise_sum(&widths) / from_usize::<T>(widths.len()),
    };
    Ok(RefractionMeasurement {
        diopters,
        feature,
        geometry: geom,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_examples() {
        let mut px = vec![0.0; 30 * 30];
        px[20 * 30 + 10] = 255.0;
        let img = GrayImage::<f64>::new(30, 30, px).unwrap();
        assert_eq!(moments_centroid(&img, 0.0).unwrap(), (10.0, 20.0));

        let mut px = vec![0.0; 11 * 2];
        px[0] = 100.0;
        px[10] = 100.0;
        let img = GrayImage::<f64>::new(11, 2, px).unwrap();
        assert_eq!(moments_centroid(&img, 0.0).unwrap(), (5.0, 0.0));

        let blank = GrayImage::<f64>::filled(8, 8, 0.0).unwrap();
        assert!(matches!(moments_centroid(&blank, 0.0), Err(Error::NotFound(_))));
    }

    #[test]
    fn symmetric_ring_centroid() {
        let img = GrayImage::<f64>::from_fn(129, 129, |x, y| {
            let r = (x as f64 - 64.0).hypot(y as f64 - 64.0);
            200.0 * (-(r - 40.0).powi(2) / 18.0).exp()
        })
        .unwrap();
        let t = otsu_threshold(&img).unwrap();
        let (cx, cy) = moments_centroid(&img, t).unwrap();
        assert!((cx - 64.0).abs() < 0.1 && (cy - 64.0).abs() < 0.1);
    }

    #[test]
    fn otsu_splits_bimodal() {
        let img = GrayImage::<f64>::from_fn(10, 10, |x, _| if x < 5 { 20.0 } else { 220.0 }).unwrap();
        let t = otsu_threshold(&img).unwrap();
        assert!((20.0..220.0).contains(&t));
    }

    fn circle_geometry(r: f64) -> RingGeometry<f64> {
        let samples = (0..360)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 360.0;
                RaySample {
                    angle: a,
                    peak_point: (50.0 + r * a.cos(), 60.0 + r * a.sin()),
                    width: 7.0,
                    radius: r,
                    peak_value: 200.0,
                }
            })
            .collect();
        RingGeometry {
            center: (50.0, 60.0),
            semi_major: r,
            semi_minor: r,
            rotation: 0.0,
            samples,
            fit_residual: 0.0,
            seed_residual: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn ring_feature_examples() {
        let g = circle_geometry(100.0);
        assert!((ring_feature(&g, 1.0) - 200.0).abs() < 1e-9);
        assert!((ring_feature(&g, 0.1) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn elliptical_feature_matches_quadrature() {
        let g = RingGeometry {
            center: (0.0, 0.0),
            semi_major: 20.0,
            semi_minor: 10.0,
            rotation: 0.0,
            samples: Vec::new(),
            fit_residual: 0.0,
            seed_residual: 0.0,
            iterations: 0,
        };
        let samples: Vec<RaySample<f64>> = (0..360)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 360.0;
                let r = g.polar_radius(a);
                RaySample {
                    angle: a,
                    peak_point: (r * a.cos(), r * a.sin()),
                    width: 1.0,
                    radius: r,
                    peak_value: 1.0,
                }
            })
            .collect();
        let with = RingGeometry { samples, ..g.clone() };
        // Simpson quadrature of 2 r(phi) over a full turn.
        let n = 20_000;
        let h = std::f64::consts::TAU / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * 2.0 * g.polar_radius(k as f64 * h);
        }
        let quad = s * h / 3.0 / std::f64::consts::TAU;
        assert!((ring_feature(&with, 1.0) - quad).abs() < 1e-9);
        assert!((ring_feature(&g, 1.0) - quad).abs() < 1e-9);
    }

    #[test]
    fn blank_image_fails_in_radial_scan() {
        let img = GrayImage::<f64>::filled(64, 64, 0.0).unwrap();
        let err = measure_refraction(&img, &RefractionModel::published(), &RingConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some("radial_scan"));
        assert!(matches!(err.root(), Error::InsufficientSignal { .. }));
    }
}
