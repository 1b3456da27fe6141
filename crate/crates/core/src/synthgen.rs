//! Deterministic synthetic ground truth: eye-surface images for pupil
//! localization and photorefraction ring images for the diopter round trip.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`). Each image's
//! noise is seeded from its spec's `seed`; corpus specs are drawn from stream
//! `index` of a generator seeded with the corpus master seed, so output never
//! depends on generation order.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imagecore::{io::save_gray, GrayImage};
use crate::labels::{EyeClass, LabelMask};
use crate::pupilgeom::{trace_boundary, PupilEstimate};
use crate::ringrefraction::{RefractionModel, DEFAULT_FEATURE_SCALE, PUBLISHED_INTERCEPT, PUBLISHED_SLOPE};

fn check_level(name: &str, v: f64) -> Result<()> {
    if !(0.0..=255.0).contains(&v) {
        return Err(Error::param(format!("{name} level {v} outside [0, 255]")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::param(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

/// Add seeded Gaussian noise in raster order, then clamp and round to the
/// 8-bit grid so that the in-memory image equals its PNG encoding.
fn finish_image(width: usize, height: usize, mut px: Vec<f64>, sigma: f64, seed: u64) -> Result<GrayImage<f64>> {
    if sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
        for v in px.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in px.iter_mut() {
        *v = v.clamp(0.0, 255.0).round();
    }
    GrayImage::new(width, height, px)
}

// ── Eye images ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeLevels {
    pub pupil: f64,
    pub iris: f64,
    pub sclera: f64,
    pub background: f64,
}

impl Default for EyeLevels {
    fn default() -> Self {
        Self {
            pupil: 30.0,
            iris: 100.0,
            sclera: 200.0,
            background: 140.0,
        }
    }
}

/// Concentric pupil and iris disks inside an elliptical eye opening
/// (sclera), on a skin background. Coordinates are pixel-center based:
/// pixel `(x, y)` is centered at `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEyeSpec {
    pub width: usize,
    pub height: usize,
    pub pupil_center: (f64, f64),
    pub pupil_radius: f64,
    pub iris_radius: f64,
    /// Center of the eye opening.
    pub eye_center: (f64, f64),
    /// Semi-axes of the eye opening.
    pub sclera_radii: (f64, f64),
    pub levels: EyeLevels,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Subsamples per axis for coverage anti-aliasing.
    pub supersample: usize,
}

impl SynthEyeSpec {
    pub fn validate(&self) -> Result<()> {
        let (cx, cy) = self.pupil_center;
        let r = self.pupil_radius;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(format!("pupil radius must be positive, got {r}")));
        }
        if !(self.iris_radius > r) {
            return Err(Error::param(format!(
                "pupil radius {r} must be below iris radius {}",
                self.iris_radius
            )));
        }
        if !(cx - r >= 0.0
            && cy - r >= 0.0
            && cx + r <= (self.width as f64 - 1.0)
            && cy + r <= (self.height as f64 - 1.0))
        {
            return Err(Error::param("pupil disk leaves the frame"));
        }
        if !(self.sclera_radii.0 > 0.0 && self.sclera_radii.1 > 0.0) {
            return Err(Error::param("sclera radii must be positive"));
        }
        if self.supersample == 0 {
            return Err(Error::param("supersample must be at least 1"));
        }
        check_nonneg("noise_sigma", self.noise_sigma)?;
        let l = &self.levels;
        for (n, v) in [
            ("pupil", l.pupil),
            ("iris", l.iris),
            ("sclera", l.sclera),
            ("background", l.background),
        ] {
            check_level(n, v)?;
        }
        Ok(())
    }

    fn class_at(&self, x: f64, y: f64) -> EyeClass {
        let (px, py) = (x - self.pupil_center.0, y - self.pupil_center.1);
        let d2 = px * px + py * py;
        if d2 <= self.pupil_radius * self.pupil_radius {
            return EyeClass::Pupil;
        }
        let (ex, ey) = (
            (x - self.eye_center.0) / self.sclera_radii.0,
            (y - self.eye_center.1) / self.sclera_radii.1,
        );
        if ex * ex + ey * ey > 1.0 {
            return EyeClass::Background;
        }
        if d2 <= self.iris_radius * self.iris_radius {
            EyeClass::Iris
        } else {
            EyeClass::Sclera
        }
    }

    fn level(&self, c: EyeClass) -> f64 {
        match c {
            EyeClass::Pupil => self.levels.pupil,
            EyeClass::Iris => self.levels.iris,
            EyeClass::Sclera => self.levels.sclera,
            EyeClass::Background => self.levels.background,
        }
    }
}

/// Exact values an eye image was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeTruth {
    pub pupil_center: (f64, f64),
    pub pupil_radius: f64,
    pub iris_radius: f64,
    /// Pixels whose center lies in the pupil disk.
    pub pupil_area_px: usize,
}

pub struct SynthEye {
    pub image: GrayImage<f64>,
    pub mask: LabelMask,
    /// Pupil center and radius are the generating values; the contour traces
    /// the rasterized pupil mask.
    pub pupil: PupilEstimate<f64>,
    pub truth: EyeTruth,
}

pub fn synth_eye(spec: &SynthEyeSpec) -> Result<SynthEye> {
    spec.validate()?;
    let (w, h, s) = (spec.width, spec.height, spec.supersample);
    let inv = 1.0 / s as f64;
    let mut px = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for sy in 0..s {
                let yy = y as f64 + (sy as f64 + 0.5) * inv - 0.5;
                for sx in 0..s {
                    let xx = x as f64 + (sx as f64 + 0.5) * inv - 0.5;
                    acc += spec.level(spec.class_at(xx, yy));
                }
            }
            px.push(acc * inv * inv);
            labels.push(spec.class_at(x as f64, y as f64) as u8);
        }
    }
    let image = finish_image(w, h, px, spec.noise_sigma, spec.seed)?;
    let mask = LabelMask::new(w, h, EyeClass::COUNT, labels)?;
    let pupil_mask = mask.class_mask(EyeClass::Pupil.index());
    let contour = trace_boundary(&pupil_mask, w, h).ok_or_else(|| Error::param("pupil disk covers no pixel center"))?;
    let area = mask.class_count(EyeClass::Pupil.index());
    let pupil = PupilEstimate {
        center: spec.pupil_center,
        radius: spec.pupil_radius,
        contour,
        region_area: area,
    };
    let truth = EyeTruth {
        pupil_center: spec.pupil_center,
        pupil_radius: spec.pupil_radius,
        iris_radius: spec.iris_radius,
        pupil_area_px: area,
    };
    Ok(SynthEye {
        image,
        mask,
        pupil,
        truth,
    })
}

// ── Ring images ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for LinearModel {
    fn default() -> Self {
        Self {
            slope: PUBLISHED_SLOPE,
            intercept: PUBLISHED_INTERCEPT,
        }
    }
}

/// Gaussian-profile annulus whose mean polar diameter is
/// `model(diopters) / feature_scale` px.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRingSpec {
    pub width: usize,
    pub height: usize,
    pub diopters: f64,
    pub model: LinearModel,
    /// Feature units per px.
    pub feature_scale: f64,
    pub center: (f64, f64),
    pub eccentricity: f64,
    /// Major-axis angle, radians.
    pub rotation: f64,
    /// Cross-section standard deviation, px.
    pub sigma: f64,
    pub peak: f64,
    pub background: f64,
    /// Brightness on the dimmest side is `1 - modulation` of the peak.
    pub modulation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthRingSpec {
    fn default() -> Self {
        Self {
            width: 320,
            height: 320,
            diopters: 0.0,
            model: LinearModel::default(),
            feature_scale: DEFAULT_FEATURE_SCALE,
            center: (160.0, 160.0),
            eccentricity: 0.0,
            rotation: 0.0,
            sigma: 3.0,
            peak: 200.0,
            background: 10.0,
            modulation: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Mean of the polar radius over `n` uniform directions for an ellipse with
/// unit semi-major axis.
fn unit_mean_polar_radius(eccentricity: f64, n: usize) -> f64 {
    let b = (1.0 - eccentricity * eccentricity).sqrt();
    let s: f64 = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            b / ((b * t.cos()).powi(2) + t.sin().powi(2)).sqrt()
        })
        .sum();
    s / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingTruth {
    pub diopters: f64,
    /// `model(diopters)` in feature units.
    pub feature: f64,
    pub mean_diameter_px: f64,
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    pub rotation: f64,
}

impl SynthRingSpec {
    pub fn truth(&self) -> Result<RingTruth> {
        if self.model.slope == 0.0 || !self.model.slope.is_finite() {
            return Err(Error::param("ring model slope must be nonzero"));
        }
        if !(self.feature_scale > 0.0) {
            return Err(Error::param("feature_scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(Error::param(format!(
                "eccentricity {} outside [0, 1)",
                self.eccentricity
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("ring sigma must be positive"));
        }
        if !(0.0..1.0).contains(&self.modulation) {
            return Err(Error::param(format!("modulation {} outside [0, 1)", self.modulation)));
        }
        check_nonneg("noise_sigma", self.noise_sigma)?;
        check_level("peak", self.peak)?;
        check_level("background", self.background)?;
        let feature = self.model.slope * self.diopters + self.model.intercept;
        let mean_diameter_px = feature / self.feature_scale;
        let a = mean_diameter_px / 2.0 / unit_mean_polar_radius(self.eccentricity, 4096);
        let b = a * (1.0 - self.eccentricity * self.eccentricity).sqrt();
        if !(b > 3.0 * self.sigma) {
            return Err(Error::param(format!(
                "ring radius {b:.3} px must exceed three cross-section sigmas ({})",
                3.0 * self.sigma
            )));
        }
        let reach = a + 4.0 * self.sigma;
        let (cx, cy) = self.center;
        if cx - reach < 0.0
            || cy - reach < 0.0
            || cx + reach > self.width as f64 - 1.0
            || cy + reach > self.height as f64 - 1.0
        {
            return Err(Error::param(format!(
                "ring of semi-major {a:.2} px does not fit in the {}x{} frame",
                self.width, self.height
            )));
        }
        Ok(RingTruth {
            diopters: self.diopters,
            feature,
            mean_diameter_px,
            center: self.center,
            semi_major: a,
            semi_minor: b,
            rotation: self.rotation,
        })
    }
}

pub struct SynthRing {
    pub image: GrayImage<f64>,
    pub truth: RingTruth,
}

pub fn synth_ring(spec: &SynthRingSpec) -> Result<SynthRing> {
    let truth = spec.truth()?;
    let (a, b) = (truth.semi_major, truth.semi_minor);
    let (cx, cy) = spec.center;
    let inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let mut px = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let rho = dx.hypot(dy);
            let phi = dy.atan2(dx);
            let t = phi - spec.rotation;
            let re = a * b / ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt();
            let gain = 1.0 - spec.modulation * (1.0 + phi.cos()) / 2.0;
            px.push(spec.background + spec.peak * gain * (-(rho - re).powi(2) * inv2s2).exp());
        }
    }
    let image = finish_image(spec.width, spec.height, px, spec.noise_sigma, spec.seed)?;
    Ok(SynthRing { image, truth })
}

impl LinearModel {
    pub fn as_model(&self, feature_scale: f64) -> Result<RefractionModel<f64>> {
        RefractionModel::new(self.slope, self.intercept, feature_scale)
    }
}

// ── Corpora ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Eye,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Pgm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EyeCorpusConfig {
    pub width: usize,
    pub height: usize,
    pub pupil_radius: (f64, f64),
    /// Iris radius as a multiple of the pupil radius.
    pub iris_ratio: (f64, f64),
    /// Maximum offset of the pupil center from the eye center, per axis.
    pub center_jitter: f64,
    pub sclera_radii: (f64, f64),
    pub levels: EyeLevels,
    pub noise_sigma: f64,
    pub supersample: usize,
}

impl Default for EyeCorpusConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            pupil_radius: (25.0, 40.0),
            iris_ratio: (2.2, 2.8),
            center_jitter: 30.0,
            sclera_radii: (260.0, 170.0),
            levels: EyeLevels::default(),
            noise_sigma: 8.0,
            supersample: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingCorpusConfig {
    pub width: usize,
    pub height: usize,
    /// Diopter values cycled through in order.
    pub diopters: Vec<f64>,
    pub model: LinearModel,
    pub feature_scale: f64,
    pub eccentricity: (f64, f64),
    pub center_jitter: f64,
    pub sigma: f64,
    pub peak: f64,
    pub background: f64,
    pub modulation: f64,
    pub noise_sigma: f64,
}

impl Default for RingCorpusConfig {
    fn default() -> Self {
        Self {
            width: 320,
            height: 320,
            diopters: vec![-6.0, -5.25, -4.75, -3.0, -1.0, 0.0],
            model: LinearModel::default(),
            feature_scale: DEFAULT_FEATURE_SCALE,
            eccentricity: (0.0, 0.0),
            center_jitter: 5.0,
            sigma: 3.0,
            peak: 200.0,
            background: 10.0,
            modulation: 0.0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub kind: CorpusKind,
    pub count: usize,
    pub seed: u64,
    pub format: ImageFormat,
    pub eye: EyeCorpusConfig,
    pub ring: RingCorpusConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            kind: CorpusKind::Eye,
            count: 200,
            seed: 2024,
            format: ImageFormat::Png,
            eye: EyeCorpusConfig::default(),
            ring: RingCorpusConfig::default(),
        }
    }
}

impl CorpusConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(format!("corpus config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, (lo, hi): (f64, f64)| {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::param(format!("{name} range [{lo}, {hi}] is empty")));
            }
            Ok(())
        };
        match self.kind {
            CorpusKind::Eye => {
                range("pupil_radius", self.eye.pupil_radius)?;
                range("iris_ratio", self.eye.iris_ratio)?;
                if self.eye.iris_ratio.0 <= 1.0 {
                    return Err(Error::param("iris_ratio must exceed 1"));
                }
                check_nonneg("center_jitter", self.eye.center_jitter)?;
            }
            CorpusKind::Ring => {
                range("eccentricity", self.ring.eccentricity)?;
                check_nonneg("center_jitter", self.ring.center_jitter)?;
                if self.ring.diopters.is_empty() {
                    return Err(Error::param("ring corpus needs at least one diopter value"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthSpec {
    Eye(SynthEyeSpec),
    Ring(SynthRingSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthTruth {
    Eye(EyeTruth),
    Ring(RingTruth),
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Image path relative to the manifest's directory.
    pub path: String,
    pub spec: SynthSpec,
    pub truth: SynthTruth,
}

fn uniform(rng: &mut ChaCha20Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draw the render parameters of corpus image `index`.
pub fn corpus_spec(cfg: &CorpusConfig, index: usize) -> SynthSpec {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    match cfg.kind {
        CorpusKind::Eye => {
            let e = &cfg.eye;
            let center = (e.width as f64 / 2.0, e.height as f64 / 2.0);
            let r = uniform(&mut rng, e.pupil_radius);
            let ratio = uniform(&mut rng, e.iris_ratio);
            let j = (-e.center_jitter, e.center_jitter);
            let (jx, jy) = (uniform(&mut rng, j), uniform(&mut rng, j));
            SynthSpec::Eye(SynthEyeSpec {
                width: e.width,
                height: e.height,
                pupil_center: (center.0 + jx, center.1 + jy),
                pupil_radius: r,
                iris_radius: r * ratio,
                eye_center: center,
                sclera_radii: e.sclera_radii,
                levels: e.levels,
                noise_sigma: e.noise_sigma,
                seed: rng.random(),
                supersample: e.supersample,
            })
        }
        CorpusKind::Ring => {
            let c = &cfg.ring;
            let j = (-c.center_jitter, c.center_jitter);
            let (jx, jy) = (uniform(&mut rng, j), uniform(&mut rng, j));
            SynthSpec::Ring(SynthRingSpec {
                width: c.width,
                height: c.height,
                diopters: c.diopters[index % c.diopters.len()],
                model: c.model,
                feature_scale: c.feature_scale,
                center: (c.width as f64 / 2.0 + jx, c.height as f64 / 2.0 + jy),
                eccentricity: uniform(&mut rng, c.eccentricity),
                rotation: rng.random_range(0.0..std::f64::consts::PI),
                sigma: c.sigma,
                peak: c.peak,
                background: c.background,
                modulation: c.modulation,
                noise_sigma: c.noise_sigma,
                seed: rng.random(),
            })
        }
    }
}

pub fn corpus_file_name(cfg: &CorpusConfig, index: usize) -> String {
    let stem = match cfg.kind {
        CorpusKind::Eye => "eye",
        CorpusKind::Ring => "ring",
    };
    format!("{stem}_{index:04}.{}", cfg.format.extension())
}

/// Render a spec. Returns the image and its truth.
pub fn render(spec: &SynthSpec) -> Result<(GrayImage<f64>, SynthTruth)> {
    match spec {
        SynthSpec::Eye(s) => {
            let e = synth_eye(s)?;
            Ok((e.image, SynthTruth::Eye(e.truth)))
        }
        SynthSpec::Ring(s) => {
            let r = synth_ring(s)?;
            Ok((r.image, SynthTruth::Ring(r.truth)))
        }
    }
}

/// Render one record's image into `dir`.
pub fn write_record(spec: &SynthSpec, dir: &Path, file: &str) -> Result<ManifestRecord> {
    let (image, truth) = render(spec)?;
    save_gray(dir.join(file), &image)?;
    Ok(ManifestRecord {
        path: file.to_string(),
        spec: spec.clone(),
        truth,
    })
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_HASH_FILE: &str = "manifest.sha256";

/// Serialize records as JSON lines.
pub fn manifest_bytes(records: &[ManifestRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Serde(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `manifest.jsonl` and `manifest.sha256` into `dir`; returns the hash.
pub fn write_manifest(dir: &Path, records: &[ManifestRecord]) -> Result<String> {
    let bytes = manifest_bytes(records)?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    let hash = sha256_hex(&bytes);
    let hash_path = dir.join(MANIFEST_HASH_FILE);
    let mut f = std::fs::File::create(&hash_path).map_err(|e| Error::io(&hash_path, e))?;
    writeln!(f, "{hash}  {MANIFEST_FILE}").map_err(|e| Error::io(&hash_path, e))?;
    Ok(hash)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Serde(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub count: usize,
    /// Manifest file name inside the corpus directory.
    pub manifest: String,
    pub manifest_sha256: String,
    pub config: CorpusConfig,
}

/// Generate a corpus sequentially into `dir`.
pub fn synth_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<CorpusSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = (0..cfg.count)
        .map(|i| write_record(&corpus_spec(cfg, i), dir, &corpus_file_name(cfg, i)))
        .collect::<Result<Vec<_>>>()?;
    let hash = write_manifest(dir, &records)?;
    Ok(CorpusSummary {
        count: records.len(),
        manifest: MANIFEST_FILE.to_string(),
        manifest_sha256: hash,
        config: cfg.clone(),
    })
}

/// Re-render every record of a manifest into `dir` and rewrite the manifest.
pub fn regenerate_from_manifest(manifest: impl AsRef<Path>, dir: &Path) -> Result<String> {
    let records = read_manifest(manifest)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fresh = records
        .iter()
        .map(|r| write_record(&r.spec, dir, &r.path))
        .collect::<Result<Vec<_>>>()?;
    write_manifest(dir, &fresh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye_spec(noise: f64) -> SynthEyeSpec {
        SynthEyeSpec {
            width: 200,
            height: 160,
            pupil_center: (101.3, 78.6),
            pupil_radius: 20.0,
            iris_radius: 48.0,
            eye_center: (100.0, 80.0),
            sclera_radii: (90.0, 70.0),
            levels: EyeLevels::default(),
            noise_sigma: noise,
            seed: 11,
            supersample: 4,
        }
    }

    #[test]
    fn eye_is_deterministic() {
        let a = synth_eye(&eye_spec(8.0)).unwrap();
        let b = synth_eye(&eye_spec(8.0)).unwrap();
        assert_eq!(a.image, b.image);
        let c = synth_eye(&SynthEyeSpec {
            seed: 12,
            ..eye_spec(8.0)
        })
        .unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn pupil_mask_area_matches_disk() {
        let e = synth_eye(&eye_spec(0.0)).unwrap();
        let area = std::f64::consts::PI * 400.0;
        let ring = 2.0 * std::f64::consts::PI * 20.0;
        assert!((e.truth.pupil_area_px as f64 - area).abs() <= ring);
        assert_eq!(e.mask.get(101, 79), EyeClass::Pupil as u8);
        assert_eq!(e.mask.get(0, 0), EyeClass::Background as u8);
        assert_eq!(e.mask.get(101, 79 + 30), EyeClass::Iris as u8);
        assert!(e.pupil.contour.closed);
    }

    #[test]
    fn noiseless_eye_is_located() {
        let e = synth_eye(&eye_spec(0.0)).unwrap();
        let est = crate::pupilgeom::locate_pupil(&e.image, &Default::default()).unwrap();
        assert!(
            (est.center.0 - 101.3).hypot(est.center.1 - 78.6) <= 1.0,
            "{:?}",
            est.center
        );
    }

    #[test]
    fn invalid_eye_geometry() {
        assert!(synth_eye(&SynthEyeSpec {
            iris_radius: 10.0,
            ..eye_spec(0.0)
        })
        .is_err());
        assert!(synth_eye(&SynthEyeSpec {
            pupil_center: (5.0, 5.0),
            ..eye_spec(0.0)
        })
        .is_err());
        let mut s = eye_spec(0.0);
        s.levels.pupil = 300.0;
        assert!(synth_eye(&s).is_err());
    }

    #[test]
    fn ring_truth_diameter_at_intercept() {
        let spec = SynthRingSpec {
            width: 300,
            height: 300,
            center: (150.0, 150.0),
            ..SynthRingSpec::default()
        };
        let t = spec.truth().unwrap();
        assert!((t.mean_diameter_px - 244.738).abs() < 1e-9);
        assert!((t.semi_major - 122.369).abs() < 1e-9);
    }

    #[test]
    fn elliptical_ring_mean_diameter() {
        let spec = SynthRingSpec {
            eccentricity: 0.5,
            ..SynthRingSpec::default()
        };
        let t = spec.truth().unwrap();
        let g = crate::ringrefraction::RingGeometry {
            center: t.center,
            semi_major: t.semi_major,
            semi_minor: t.semi_minor,
            rotation: 0.0,
            samples: vec![],
            fit_residual: 0.0,
            seed_residual: 0.0,
            iterations: 0,
        };
        assert!((g.mean_polar_diameter(360) - t.mean_diameter_px).abs() < 1e-6);
    }

    #[test]
    fn ring_errors_and_determinism() {
        assert!(synth_ring(&SynthRingSpec {
            width: 200,
            height: 200,
            center: (100.0, 100.0),
            ..Default::default()
        })
        .is_err());
        let s = SynthRingSpec {
            noise_sigma: 8.0,
            seed: 5,
            ..Default::default()
        };
        assert_eq!(synth_ring(&s).unwrap().image, synth_ring(&s).unwrap().image);
    }

    #[test]
    fn corpus_specs_respect_ranges_and_order() {
        let cfg = CorpusConfig {
            count: 30,
            ..CorpusConfig::default()
        };
        for i in 0..cfg.count {
            let SynthSpec::Eye(s) = corpus_spec(&cfg, i) else {
                panic!()
            };
            assert!((25.0..=40.0).contains(&s.pupil_radius));
            assert_eq!(SynthSpec::Eye(s), corpus_spec(&cfg, i));
        }
    }

    #[test]
    fn toml_config_round_trip() {
        let cfg = CorpusConfig::from_toml("kind = \"ring\"\ncount = 3\nseed = 9\n[ring]\nnoise_sigma = 8.0\n").unwrap();
        assert_eq!(cfg.kind, CorpusKind::Ring);
        assert_eq!(cfg.ring.noise_sigma, 8.0);
        assert_eq!(cfg.ring.width, 320);
        assert!(CorpusConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn corpus_regenerates_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            count: 3,
            eye: EyeCorpusConfig {
                width: 160,
                height: 120,
                pupil_radius: (10.0, 15.0),
                sclera_radii: (70.0, 50.0),
                center_jitter: 5.0,
                ..Default::default()
            },
            ..CorpusConfig::default()
        };
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let sum = synth_corpus(&cfg, &a).unwrap();
        let hash = regenerate_from_manifest(a.join(MANIFEST_FILE), &b).unwrap();
        assert_eq!(sum.manifest_sha256, hash);
        for i in 0..3 {
            let f = corpus_file_name(&cfg, i);
            assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap());
        }
        let recs = read_manifest(a.join(MANIFEST_FILE)).unwrap();
        assert_eq!(recs.len(), 3);
    }
}
