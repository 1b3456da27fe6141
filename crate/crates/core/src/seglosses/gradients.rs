//! Closed-form partial derivatives of the overlap losses with respect to each
//! predicted probability, plus a central finite-difference checker.

use serde::{Deserialize, Serialize};

use super::losses::{
    band_sums, boundary_aware_loss, boundary_band, class_weights, cross_entropy, dice_loss, dice_sums,
    surface_loss_surrogate, LossWeights,
};
use super::sdm::signed_distance_map;
use super::ProbMap;
use crate::error::{Error, Result};
use crate::labels::LabelMask;
use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Cel,
    Dice,
    Bal,
}

/// Gradient laid out like [`ProbMap::values`].
pub fn loss_gradients<T: Real>(
    pred: &ProbMap<T>,
    truth: &LabelMask,
    which: LossKind,
    cfg: &LossWeights,
) -> Result<Vec<T>> {
    pred.check_against(truth)?;
    let c = pred.classes();
    let n = pred.pixels();
    let eps = lit::<T>(cfg.epsilon);
    let two = lit::<T>(2.0);
    let mut grad = vec![T::zero(); n * c];
    match which {
        LossKind::Cel => {
            if pred.values().iter().any(|&p| !(p > T::zero() && p < T::one())) {
                return Err(Error::param(
                    "cross-entropy gradient needs probabilities strictly inside (0, 1)",
                ));
            }
            let nn = from_usize::<T>(n);
            for (i, &l) in truth.labels().iter().enumerate() {
                let k = i * c + l as usize;
                grad[k] = -T::one() / (nn * pred.values()[k]);
            }
        }
        LossKind::Dice => {
            let w = class_weights::<T>(truth).normalized;
            for class in 0..c {
                if w[class] == T::zero() {
                    continue;
                }
                let (inter, mass, count) = dice_sums(pred, truth, class);
                let denom = mass + count + eps;
                let numer = two * inter + eps;
                for i in 0..n {
                    let y = if truth.indicator(i, class) { T::one() } else { T::zero() };
                    grad[i * c + class] = -w[class] * (two * y * denom - numer) / (denom * denom);
                }
            }
        }
        LossKind::Bal => {
            let class = cfg.target_class;
            let mask = truth.class_mask(class);
            let band = boundary_band(&mask, truth.width(), truth.height(), lit::<T>(cfg.band_tau))?;
            if band.is_empty() {
                return Ok(grad);
            }
            let (inter, mass, count) = band_sums(pred, truth, class, &band);
            let denom = mass + count + eps;
            let numer = two * inter + eps;
            for &i in &band {
                let y = if mask[i] { T::one() } else { T::zero() };
                grad[i * c + class] = -(two * y * denom - numer) / (denom * denom);
            }
        }
    }
    Ok(grad)
}

fn loss_value<T: Real>(pred: &ProbMap<T>, truth: &LabelMask, which: LossKind, cfg: &LossWeights) -> Result<T> {
    let eps = lit::<T>(cfg.epsilon);
    match which {
        LossKind::Cel => cross_entropy(pred, truth),
        LossKind::Dice => dice_loss(pred, truth, &class_weights::<T>(truth).normalized, eps),
        LossKind::Bal => {
            let mask = truth.class_mask(cfg.target_class);
            let band = boundary_band(&mask, truth.width(), truth.height(), lit::<T>(cfg.band_tau))?;
            Ok(boundary_aware_loss(pred, truth, cfg.target_class, &band, eps)?.loss)
        }
    }
}

/// Central finite differences of a loss, one entry at a time.
pub fn finite_difference_gradient<T: Real>(
    pred: &ProbMap<T>,
    truth: &LabelMask,
    which: LossKind,
    cfg: &LossWeights,
    h: T,
) -> Result<Vec<T>> {
    let mut work = pred.clone();
    let mut out = Vec::with_capacity(pred.values().len());
    let two = lit::<T>(2.0);
    for k in 0..pred.values().len() {
        let orig = work.values()[k];
        work.values_mut()[k] = orig + h;
        let up = loss_value(&work, truth, which, cfg)?;
        work.values_mut()[k] = orig - h;
        let down = loss_value(&work, truth, which, cfg)?;
        work.values_mut()[k] = orig;
        out.push((up - down) / (two * h));
    }
    Ok(out)
}

/// Largest `|a - f| / max(|a|, |f|)` over entries (0 where both vanish).
pub fn max_relative_error<T: Real>(analytic: &[T], numeric: &[T]) -> T {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &f)| {
            let scale = a.abs().max(f.abs());
            if scale == T::zero() {
                T::zero()
            } else {
                (a - f).abs() / scale
            }
        })
        .fold(T::zero(), |m, e| m.max(e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport<T> {
    pub cel: T,
    pub dice: T,
    pub bal: T,
    /// Largest absolute deviation for the surface surrogate, or `None` when
    /// the target class mask is degenerate.
    pub surrogate_abs: Option<T>,
    pub step: T,
}

impl<T: Real> GradcheckReport<T> {
    pub fn max_relative(&self) -> T {
        self.cel.max(self.dice).max(self.bal)
    }
}

/// Compare every analytic gradient with central differences of step `h`.
pub fn gradcheck<T: Real>(pred: &ProbMap<T>, truth: &LabelMask, cfg: &LossWeights, h: T) -> Result<GradcheckReport<T>> {
    let mut rel = [T::zero(); 3];
    for (slot, kind) in rel.iter_mut().zip([LossKind::Cel, LossKind::Dice, LossKind::Bal]) {
        let a = loss_gradients(pred, truth, kind, cfg)?;
        let f = finite_difference_gradient(pred, truth, kind, cfg, h)?;
        *slot = max_relative_error(&a, &f);
    }

    let mask = truth.class_mask(cfg.target_class);
    let surrogate_abs = match signed_distance_map::<T>(&mask, truth.width(), truth.height()) {
        Ok(sdm) => {
            let mut plane = pred.plane(cfg.target_class);
            let (_, analytic) = surface_loss_surrogate(&plane, &sdm)?;
            let mut worst = T::zero();
            let two = lit::<T>(2.0);
            for k in 0..plane.len() {
                let orig = plane[k];
                plane[k] = orig + h;
                let (up, _) = surface_loss_surrogate(&plane, &sdm)?;
                plane[k] = orig - h;
                let (down, _) = surface_loss_surrogate(&plane, &sdm)?;
                plane[k] = orig;
                worst = worst.max(((up - down) / (two * h) - analytic[k]).abs());
            }
            Some(worst)
        }
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(GradcheckReport {
        cel: rel[0],
        dice: rel[1],
        bal: rel[2],
        surrogate_abs,
        step: h,
    })
}

/// Random gradient-check instance: uniform labels and softmax-of-normal
/// probabilities, drawn from ChaCha20 seeded with `seed`.
pub fn random_instance(seed: u64, width: usize, height: usize, classes: usize) -> Result<(ProbMap<f64>, LabelMask)> {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    if classes < 2 {
        return Err(Error::param("random instances need at least 2 classes"));
    }
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let n = width * height;
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..classes) as u8).collect();
    let mut values = Vec::with_capacity(n * classes);
    for _ in 0..n {
        let logits: Vec<f64> = (0..classes).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        values.extend(exp.iter().map(|e| e / z));
    }
    Ok((
        ProbMap::new(width, height, classes, values)?,
        LabelMask::new(width, height, classes, labels)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cel_single_pixel_hand_derivative() {
        let truth = LabelMask::new(1, 1, 2, vec![0]).unwrap();
        let p = ProbMap::<f64>::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        let g = loss_gradients(&p, &truth, LossKind::Cel, &LossWeights::default()).unwrap();
        assert_eq!(g, vec![-2.0, 0.0]);
    }

    #[test]
    fn cel_rejects_boundary_probabilities() {
        let truth = LabelMask::new(1, 1, 2, vec![0]).unwrap();
        let p = ProbMap::<f64>::from_labels(&truth);
        assert!(loss_gradients(&p, &truth, LossKind::Cel, &LossWeights::default()).is_err());
    }

    #[test]
    fn dice_gradient_finite_at_perfect_prediction() {
        let truth = LabelMask::new(3, 1, 2, vec![0, 1, 1]).unwrap();
        let p = ProbMap::<f64>::from_labels(&truth);
        let g = loss_gradients(&p, &truth, LossKind::Dice, &LossWeights::default()).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn small_gradcheck() {
        let truth = LabelMask::new(3, 3, 2, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        let vals: Vec<f64> = (0..9)
            .flat_map(|i| {
                let p = 0.2 + 0.06 * i as f64;
                [1.0 - p, p]
            })
            .collect();
        let p = ProbMap::new(3, 3, 2, vals).unwrap();
        let cfg = LossWeights {
            target_class: 1,
            ..Default::default()
        };
        let r = gradcheck(&p, &truth, &cfg, 1e-5).unwrap();
        assert!(r.max_relative() < 1e-6, "{r:?}");
        assert!(r.surrogate_abs.unwrap() < 1e-8);
    }

    #[test]
    fn random_instances_are_seeded() {
        let (p1, t1) = random_instance(4, 8, 8, 4).unwrap();
        let (p2, t2) = random_instance(4, 8, 8, 4).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
        assert_ne!(random_instance(5, 8, 8, 4).unwrap().1, t1);
    }
}
