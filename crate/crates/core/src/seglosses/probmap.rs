use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMask;
use crate::scalar::{from_usize, lit, Real};

/// Per-pixel class probabilities, pixel-major: `values[i * classes + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbMap<T>", bound(deserialize = "T: Real"))]
pub struct ProbMap<T> {
    width: usize,
    height: usize,
    classes: usize,
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
struct RawProbMap<T> {
    width: usize,
    height: usize,
    classes: usize,
    values: Vec<T>,
}

impl<T: Real> TryFrom<RawProbMap<T>> for ProbMap<T> {
    type Error = Error;
    fn try_from(r: RawProbMap<T>) -> Result<Self> {
        ProbMap::new(r.width, r.height, r.classes, r.values)
    }
}

impl<T: Real> ProbMap<T> {
    /// Checked constructor: values in `[0, 1]` and per-pixel sums of 1.
    pub fn new(width: usize, height: usize, classes: usize, values: Vec<T>) -> Result<Self> {
        let map = Self::from_raw(width, height, classes, values)?;
        let tol = lit::<T>(1e-6).max(T::epsilon() * from_usize::<T>(8 * classes));
        for (i, px) in map.values.chunks_exact(classes).enumerate() {
            if px.iter().any(|&p| p < T::zero() || p > T::one()) {
                return Err(Error::param(format!("pixel {i} has a probability outside [0, 1]")));
            }
            let s = px.iter().fold(T::zero(), |a, &b| a + b);
            if (s - T::one()).abs() > tol {
                return Err(Error::param(format!("pixel {i} probabilities sum to {s}")));
            }
        }
        Ok(map)
    }

    /// Shape-checked constructor that accepts arbitrary finite values.
    /// Loss gradients treat every entry as an independent variable, so
    /// perturbed maps off the simplex are legitimate inputs.
    pub fn from_raw(width: usize, height: usize, classes: usize, values: Vec<T>) -> Result<Self> {
        if classes == 0 {
            return Err(Error::param("probability map needs at least one class"));
        }
        if values.len() != width * height * classes {
            return Err(Error::shape(
                format!("{} values ({}x{}x{})", width * height * classes, width, height, classes),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("probability map contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            classes,
            values,
        })
    }

    /// Hard one-hot prediction equal to the labels.
    pub fn from_labels(mask: &LabelMask) -> Self {
        let c = mask.num_classes();
        let mut values = vec![T::zero(); mask.len() * c];
        for (i, &l) in mask.labels().iter().enumerate() {
            values[i * c + l as usize] = T::one();
        }
        Self {
            width: mask.width(),
            height: mask.height(),
            classes: c,
            values,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }
    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }
    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    #[inline]
    pub fn get(&self, pixel: usize, class: usize) -> T {
        self.values[pixel * self.classes + class]
    }

    /// One class plane, row-major.
    pub fn plane(&self, class: usize) -> Vec<T> {
        self.values.iter().skip(class).step_by(self.classes).copied().collect()
    }

    /// Class plane thresholded at `threshold` (`p >= threshold`).
    pub fn binarize(&self, class: usize, threshold: T) -> Vec<bool> {
        self.plane(class).into_iter().map(|p| p >= threshold).collect()
    }

    /// Arg-max labels; ties go to the lower class index.
    pub fn argmax(&self) -> LabelMask {
        let labels = self
            .values
            .chunks_exact(self.classes)
            .map(|px| {
                let mut best = 0;
                for c in 1..px.len() {
                    if px[c] > px[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        LabelMask::new(self.width, self.height, self.classes, labels).expect("valid argmax labels")
    }

    pub fn check_against(&self, truth: &LabelMask) -> Result<()> {
        if self.width != truth.width() || self.height != truth.height() || self.classes != truth.num_classes() {
            return Err(Error::shape(
                format!("{}x{}x{}", truth.width(), truth.height(), truth.num_classes()),
                format!("{}x{}x{}", self.width, self.height, self.classes),
            ));
        }
        Ok(())
    }
}
