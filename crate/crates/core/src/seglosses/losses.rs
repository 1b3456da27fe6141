use serde::{Deserialize, Serialize};

use super::sdm::{boundary_pixels, euclidean_distance_transform, signed_distance_map, SignedDistanceMap};
use super::ProbMap;
use crate::error::{Error, Result};
use crate::labels::{EyeClass, LabelMask};
use crate::scalar::{from_usize, lit, pairwise_sum, sum_iter, Real};

/// Probability floor applied before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;
/// Smoothing term for the Dice-style losses.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Mean categorical cross-entropy over pixels.
pub fn cross_entropy<T: Real>(pred: &ProbMap<T>, truth: &LabelMask) -> Result<T> {
    pred.check_against(truth)?;
    if truth.is_empty() {
        return Err(Error::param("cross entropy of an empty map"));
    }
    let clamp = lit::<T>(LOG_CLAMP);
    let n = from_usize::<T>(truth.len());
    let terms: Vec<T> = truth
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| -pred.get(i, l as usize).max(clamp).min(T::one()).ln())
        .collect();
    Ok(pairwise_sum(&terms) / n)
}

/// Inverse-frequency class weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassWeights<T> {
    /// `1 / count` for present classes, 0 for absent ones.
    pub raw: Vec<T>,
    /// `raw` rescaled to sum to one over the present classes.
    pub normalized: Vec<T>,
    pub present: Vec<bool>,
}

pub fn class_weights<T: Real>(truth: &LabelMask) -> ClassWeights<T> {
    let c = truth.num_classes();
    let mut counts = vec![0usize; c];
    for &l in truth.labels() {
        counts[l as usize] += 1;
    }
    let present: Vec<bool> = counts.iter().map(|&k| k > 0).collect();
    let raw: Vec<T> = counts
        .iter()
        .map(|&k| {
            if k > 0 {
                T::one() / from_usize::<T>(k)
            } else {
                T::zero()
            }
        })
        .collect();
    let total = pairwise_sum(&raw);
    let normalized = if total > T::zero() {
        raw.iter().map(|&w| w / total).collect()
    } else {
        vec![T::zero(); c]
    };
    ClassWeights {
        raw,
        normalized,
        present,
    }
}

/// Per-class soft Dice sums: (intersection, prediction mass, truth count).
pub(crate) fn dice_sums<T: Real>(pred: &ProbMap<T>, truth: &LabelMask, class: usize) -> (T, T, T) {
    let n = truth.len();
    let inter = sum_iter((0..n).map(|i| {
        if truth.indicator(i, class) {
            pred.get(i, class)
        } else {
            T::zero()
        }
    }));
    let mass = sum_iter((0..n).map(|i| pred.get(i, class)));
    let count = from_usize::<T>(truth.class_count(class));
    (inter, mass, count)
}

/// Class-weighted soft Dice loss
/// `1 - sum_c w_c (2 I_c + eps) / (P_c + G_c + eps)`.
pub fn dice_loss<T: Real>(pred: &ProbMap<T>, truth: &LabelMask, weights: &[T], eps: T) -> Result<T> {
    pred.check_against(truth)?;
    if weights.len() != truth.num_classes() {
        return Err(Error::shape(truth.num_classes(), weights.len()));
    }
    let two = lit::<T>(2.0);
    let terms: Vec<T> = (0..truth.num_classes())
        .filter(|&c| weights[c] != T::zero())
        .map(|c| {
            let (i, p, g) = dice_sums(pred, truth, c);
            weights[c] * (two * i + eps) / (p + g + eps)
        })
        .collect();
    Ok(T::one() - pairwise_sum(&terms))
}

/// Pixels within Euclidean distance `tau` of the class boundary, as sorted
/// pixel indices. Empty when the class is absent or has no boundary.
pub fn boundary_band<T: Real>(class_mask: &[bool], width: usize, height: usize, tau: T) -> Result<Vec<usize>> {
    if !(tau >= T::zero()) {
        return Err(Error::param(format!("band radius must be non-negative, got {tau}")));
    }
    if class_mask.len() != width * height {
        return Err(Error::shape(width * height, class_mask.len()));
    }
    let boundary = boundary_pixels(class_mask, width, height);
    if !boundary.iter().any(|&b| b) {
        return Ok(Vec::new());
    }
    let dist = euclidean_distance_transform::<T>(&boundary, width, height);
    Ok(dist
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= tau)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLoss<T> {
    pub loss: T,
    /// Set when the band was empty and the loss defaulted to zero.
    pub empty_band: bool,
}

pub(crate) fn band_sums<T: Real>(pred: &ProbMap<T>, truth: &LabelMask, class: usize, band: &[usize]) -> (T, T, T) {
    let inter = sum_iter(band.iter().map(|&i| {
        if truth.indicator(i, class) {
            pred.get(i, class)
        } else {
            T::zero()
        }
    }));
    let mass = sum_iter(band.iter().map(|&i| pred.get(i, class)));
    let count = from_usize::<T>(band.iter().filter(|&&i| truth.indicator(i, class)).count());
    (inter, mass, count)
}

/// Soft Dice loss of one class restricted to the band pixels.
pub fn boundary_aware_loss<T: Real>(
    pred: &ProbMap<T>,
    truth: &LabelMask,
    class: usize,
    band: &[usize],
    eps: T,
) -> Result<BoundaryLoss<T>> {
    pred.check_against(truth)?;
    if class >= truth.num_classes() {
        return Err(Error::param(format!("class {class} out of range")));
    }
    if band.iter().any(|&i| i >= truth.len()) {
        return Err(Error::param("band pixel index outside the map"));
    }
    if band.is_empty() {
        return Ok(BoundaryLoss {
            loss: T::zero(),
            empty_band: true,
        });
    }
    let (i, p, g) = band_sums(pred, truth, class, band);
    let two = lit::<T>(2.0);
    Ok(BoundaryLoss {
        loss: T::one() - (two * i + eps) / (p + g + eps),
        empty_band: false,
    })
}

/// Mean absolute difference of the two masks' signed distance maps over the
/// whole frame.
pub fn surface_loss<T: Real>(pred_mask: &[bool], truth_mask: &[bool], width: usize, height: usize) -> Result<T> {
    if pred_mask.len() != truth_mask.len() {
        return Err(Error::shape(truth_mask.len(), pred_mask.len()));
    }
    let sp = signed_distance_map::<T>(pred_mask, width, height)?;
    let st = signed_distance_map::<T>(truth_mask, width, height)?;
    let diffs: Vec<T> = sp
        .values()
        .iter()
        .zip(st.values())
        .map(|(a, b)| (*a - *b).abs())
        .collect();
    Ok(pairwise_sum(&diffs) / from_usize::<T>(diffs.len()))
}

/// Differentiable stand-in for the surface loss: `(1/|Omega|) sum p_i S(y_i)`.
///
/// The literal surface loss binarizes the prediction and has zero gradient
/// almost everywhere; this linear functional is what gradient-based training
/// can use. Returns the value and its (prediction-independent) gradient.
pub fn surface_loss_surrogate<T: Real>(plane: &[T], truth_sdm: &SignedDistanceMap<T>) -> Result<(T, Vec<T>)> {
    if plane.len() != truth_sdm.values().len() {
        return Err(Error::shape(truth_sdm.values().len(), plane.len()));
    }
    let n = from_usize::<T>(plane.len());
    let value = sum_iter(plane.iter().zip(truth_sdm.values()).map(|(p, s)| *p * *s)) / n;
    let grad = truth_sdm.values().iter().map(|&s| s / n).collect();
    Ok((value, grad))
}

/// Gradient of [`surface_loss_surrogate`]: `S(y) / |Omega|`.
pub fn surface_loss_surrogate_gradient<T: Real>(plane: &[T], truth_sdm: &SignedDistanceMap<T>) -> Result<Vec<T>> {
    surface_loss_surrogate(plane, truth_sdm).map(|(_, g)| g)
}

/// Linear ramp reaching `alpha_max` at half of the total epochs.
pub fn alpha_schedule<T: Real>(epoch: usize, total_epochs: usize, alpha_max: T) -> Result<T> {
    if total_epochs < 2 {
        return Err(Error::param(format!("total_epochs must be >= 2, got {total_epochs}")));
    }
    let half = from_usize::<T>(total_epochs) / lit(2.0);
    let ramp = (from_usize::<T>(epoch) / half).min(T::one());
    Ok(alpha_max * ramp)
}

/// Weights and hyper-parameters of the combined loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Cross-entropy weight.
    pub lambda1: f64,
    /// Boundary-aware loss weight.
    pub lambda2: f64,
    /// Peak of the Dice-to-surface hand-over.
    pub alpha_max: f64,
    pub epsilon: f64,
    /// Band radius (px) around the target-class boundary.
    pub band_tau: f64,
    /// Class whose boundary drives the boundary and surface terms.
    pub target_class: usize,
    /// Threshold used to binarize the prediction for the surface term.
    pub surface_threshold: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 10.0,
            alpha_max: 1.0,
            epsilon: DEFAULT_EPSILON,
            band_tau: 2.0,
            target_class: EyeClass::Pupil.index(),
            surface_threshold: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda1) || !finite_nonneg(self.lambda2) || !finite_nonneg(self.band_tau) {
            return Err(Error::param("loss weights must be finite and non-negative"));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return Err(Error::param(format!(
                "alpha_max must be in (0, 1], got {}",
                self.alpha_max
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param("epsilon must be non-negative"));
        }
        Ok(())
    }

    /// `[lambda1, lambda2, 1 - alpha, alpha]` for the given schedule point.
    pub fn lambdas<T: Real>(&self, epoch: usize, total: usize) -> Result<[T; 4]> {
        let alpha = alpha_schedule(epoch, total, lit::<T>(self.alpha_max))?;
        Ok([lit(self.lambda1), lit(self.lambda2), T::one() - alpha, alpha])
    }
}

/// Unweighted terms, their weights, and the weighted total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown<T> {
    pub cel: T,
    pub dice: T,
    pub bal: T,
    pub surface: T,
    /// `[lambda1, lambda2, lambda3, lambda4]` applied to `[cel, bal, dice, surface]`.
    pub lambda: [T; 4],
    pub total: T,
    pub epoch: usize,
    pub bal_empty_band: bool,
}

impl<T: Real> LossBreakdown<T> {
    /// Weighted sum of the stored terms.
    pub fn recombine(&self) -> T {
        let [l1, l2, l3, l4] = self.lambda;
        pairwise_sum(&[l1 * self.cel, l2 * self.bal, l3 * self.dice, l4 * self.surface])
    }
}

/// `lambda1 CEL + lambda2 BAL + (1 - alpha) Dice + alpha Surface`.
pub fn combined_loss<T: Real>(
    pred: &ProbMap<T>,
    truth: &LabelMask,
    cfg: &LossWeights,
    epoch: usize,
    total_epochs: usize,
) -> Result<LossBreakdown<T>> {
    cfg.validate()?;
    pred.check_against(truth)?;
    let eps = lit::<T>(cfg.epsilon);
    let cel = cross_entropy(pred, truth)?;
    let w = class_weights::<T>(truth);
    let dice = dice_loss(pred, truth, &w.normalized, eps)?;

    let class = cfg.target_class;
    let (width, height) = (truth.width(), truth.height());
    let truth_mask = truth.class_mask(class);
    let band = boundary_band(&truth_mask, width, height, lit::<T>(cfg.band_tau))?;
    let bal = boundary_aware_loss(pred, truth, class, &band, eps)?;
    let pred_mask = pred.binarize(class, lit(cfg.surface_threshold));
    let surface = surface_loss::<T>(&pred_mask, &truth_mask, width, height).map_err(|e| e.at_stage("surface_loss"))?;

    let lambda = cfg.lambdas::<T>(epoch, total_epochs)?;
    let mut out = LossBreakdown {
        cel,
        dice,
        bal: bal.loss,
        surface,
        lambda,
        total: T::zero(),
        epoch,
        bal_empty_band: bal.empty_band,
    };
    out.total = out.recombine();
    Ok(out)
}
