//! Localization accuracy, segmentation overlap and image-quality metrics.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize, Serializer};

use crate::edgedetect::sobel_gradients;
use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::labels::LabelMask;
use crate::scalar::{from_usize, lit, pairwise_sum, sum_iter, Real};

// ── Localization ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord<T> {
    pub predicted: (T, T),
    pub truth: (T, T),
    pub truth_radius: T,
}

/// Euclidean distance between predicted and true centers.
pub fn ede<T: Real>(rec: &LocalizationRecord<T>) -> T {
    let dx = rec.predicted.0 - rec.truth.0;
    let dy = rec.predicted.1 - rec.truth.1;
    dx.hypot(dy)
}

/// EDE divided by the true pupil radius.
pub fn normalized_error<T: Real>(ede_px: T, truth_radius: T) -> Result<T> {
    if !(truth_radius > T::zero()) {
        return Err(Error::param(format!(
            "true radius must be positive, got {truth_radius}"
        )));
    }
    Ok(ede_px / truth_radius)
}

/// Mean of squared EDEs.
pub fn mse_of_edes<T: Real>(edes: &[T]) -> Result<T> {
    if edes.is_empty() {
        return Err(Error::param("mean squared error of an empty list"));
    }
    let sq: Vec<T> = edes.iter().map(|&e| e * e).collect();
    Ok(pairwise_sum(&sq) / from_usize::<T>(edes.len()))
}

/// Corpus-level localization figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary<T> {
    pub count: usize,
    pub mean_ede: T,
    pub max_ede: T,
    pub min_ede: T,
    /// Mean EDE over mean true radius.
    pub ne: T,
    /// Mean of per-image normalized errors.
    pub mean_ne: T,
    pub mse: T,
}

pub fn summarize_localization<T: Real>(records: &[LocalizationRecord<T>]) -> Result<LocalizationSummary<T>> {
    if records.is_empty() {
        return Err(Error::param("no localization records"));
    }
    let n = from_usize::<T>(records.len());
    let edes: Vec<T> = records.iter().map(ede).collect();
    let nes = records
        .iter()
        .zip(&edes)
        .map(|(r, &e)| normalized_error(e, r.truth_radius))
        .collect::<Result<Vec<T>>>()?;
    let mean_ede = pairwise_sum(&edes) / n;
    let mean_r = sum_iter(records.iter().map(|r| r.truth_radius)) / n;
    Ok(LocalizationSummary {
        count: records.len(),
        mean_ede,
        max_ede: edes.iter().copied().fold(T::zero(), T::max),
        min_ede: edes.iter().copied().fold(T::infinity(), T::min),
        ne: mean_ede / mean_r,
        mean_ne: pairwise_sum(&nes) / n,
        mse: mse_of_edes(&edes)?,
    })
}

// ── Segmentation ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn confusion(pred: &LabelMask, truth: &LabelMask, class: usize) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        let (p, t) = (p as usize == class, t as usize == class);
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            _ => {}
        }
    }
    c
}

/// F1 (Dice) of one class; `None` when the class is absent from both masks.
pub fn f1_score<T: Real>(pred: &LabelMask, truth: &LabelMask, class: usize) -> Result<Option<T>> {
    pred.same_shape(truth)?;
    let c = confusion(pred, truth, class);
    if c.tp + c.fp + c.fn_ == 0 {
        return Ok(None);
    }
    let two_tp = from_usize::<T>(2 * c.tp);
    Ok(Some(two_tp / (two_tp + from_usize::<T>(c.fp + c.fn_))))
}

/// Intersection over union of one class; `None` when absent from both.
pub fn class_iou<T: Real>(pred: &LabelMask, truth: &LabelMask, class: usize) -> Result<Option<T>> {
    pred.same_shape(truth)?;
    let c = confusion(pred, truth, class);
    let union = c.tp + c.fp + c.fn_;
    if union == 0 {
        return Ok(None);
    }
    Ok(Some(from_usize::<T>(c.tp) / from_usize::<T>(union)))
}

fn macro_mean<T: Real>(values: &[Option<T>]) -> T {
    let present: Vec<T> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return T::zero();
    }
    pairwise_sum(&present) / from_usize::<T>(present.len())
}

/// Mean IoU over classes present in either mask.
pub fn miou<T: Real>(pred: &LabelMask, truth: &LabelMask, num_classes: usize) -> Result<T> {
    let per = (0..num_classes)
        .map(|c| class_iou(pred, truth, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(macro_mean(&per))
}

/// Macro F1 over classes present in either mask.
pub fn macro_f1<T: Real>(pred: &LabelMask, truth: &LabelMask, num_classes: usize) -> Result<T> {
    let per = (0..num_classes)
        .map(|c| f1_score(pred, truth, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(macro_mean(&per))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationReport<T> {
    pub f1: T,
    pub miou: T,
    pub per_class_iou: Vec<Option<T>>,
    pub per_class_f1: Vec<Option<T>>,
}

pub fn evaluate_segmentation<T: Real>(pred: &LabelMask, truth: &LabelMask) -> Result<SegmentationReport<T>> {
    let k = pred.num_classes().max(truth.num_classes());
    let per_class_iou = (0..k).map(|c| class_iou(pred, truth, c)).collect::<Result<Vec<_>>>()?;
    let per_class_f1 = (0..k).map(|c| f1_score(pred, truth, c)).collect::<Result<Vec<_>>>()?;
    Ok(SegmentationReport {
        f1: macro_mean(&per_class_f1),
        miou: macro_mean(&per_class_iou),
        per_class_iou,
        per_class_f1,
    })
}

// ── Image quality ─────────────────────────────────────────────────────────

/// Mean intensity.
pub fn brightness<T: Real>(img: &GrayImage<T>) -> Result<T> {
    if img.is_empty() {
        return Err(Error::param("brightness of an empty image"));
    }
    Ok(pairwise_sum(img.pixels()) / from_usize::<T>(img.len()))
}

/// Population standard deviation of intensities.
pub fn rms_contrast<T: Real>(img: &GrayImage<T>) -> Result<T> {
    let mean = brightness(img)?;
    let dev: Vec<T> = img.pixels().iter().map(|&v| (v - mean) * (v - mean)).collect();
    Ok((pairwise_sum(&dev) / from_usize::<T>(img.len())).sqrt())
}

/// `20 log10(mean / sigma)`; `None` when either is zero.
pub fn snr_db<T: Real>(img: &GrayImage<T>) -> Result<Option<T>> {
    let mean = brightness(img)?;
    let sigma = rms_contrast(img)?;
    if mean == T::zero() || sigma == T::zero() {
        return Ok(None);
    }
    Ok(Some(lit::<T>(20.0) * (mean / sigma).log10()))
}

/// Mean Sobel gradient magnitude over interior pixels.
pub fn spatial_sharpness<T: Real>(img: &GrayImage<T>) -> Result<T> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::param(format!(
            "spatial sharpness needs at least 3x3 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let g = sobel_gradients(img)?;
    let (w, h) = (img.width(), img.height());
    let interior: Vec<T> = (1..h - 1)
        .flat_map(|y| (1..w - 1).map(move |x| (x, y)))
        .map(|(x, y)| g.magnitude_at(x, y))
        .collect();
    Ok(pairwise_sum(&interior) / from_usize::<T>(interior.len()))
}

/// Radius of the high-frequency band as a fraction of the Nyquist frequency.
pub const HIGH_BAND_FRACTION: f64 = 0.25;

/// Mean power of the spectral content above `0.25 x Nyquist`.
///
/// With an orthonormal 2D DFT `F`, this is `sum_{|f| > cutoff} |F|^2 / MN`,
/// i.e. by Parseval the mean square of the high-passed image.
pub fn frequency_sharpness<T: Real>(img: &GrayImage<T>) -> Result<T> {
    let (w, h) = (img.width(), img.height());
    if img.is_empty() {
        return Err(Error::param("frequency sharpness of an empty image"));
    }
    let mut data: Vec<Complex<T>> = img.pixels().iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut planner = FftPlanner::<T>::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    let cutoff = HIGH_BAND_FRACTION * 0.5;
    let freq = |k: usize, n: usize| {
        let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        k / n as f64
    };
    let mut band = Vec::new();
    for v in 0..h {
        let fv = freq(v, h);
        for u in 0..w {
            let fu = freq(u, w);
            if fu.hypot(fv) > cutoff {
                band.push(data[v * w + u].norm_sqr());
            }
        }
    }
    let mn = from_usize::<T>(w * h);
    Ok(pairwise_sum(&band) / (mn * mn))
}

fn serialize_snr<T: Real, S: Serializer>(v: &Option<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => x.serialize(s),
        None => s.serialize_str("undefined"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct QualityReport<T> {
    pub brightness: T,
    pub rms_contrast: T,
    /// `"undefined"` in JSON when the SNR has no finite value.
    #[serde(serialize_with = "serialize_snr")]
    pub snr_db: Option<T>,
    pub spatial_sharpness: T,
    pub frequency_sharpness: T,
}

pub fn quality_report<T: Real>(img: &GrayImage<T>) -> Result<QualityReport<T>> {
    Ok(QualityReport {
        brightness: brightness(img)?,
        rms_contrast: rms_contrast(img)?,
        snr_db: snr_db(img)?,
        spatial_sharpness: spatial_sharpness(img)?,
        frequency_sharpness: frequency_sharpness(img)?,
    })
}
