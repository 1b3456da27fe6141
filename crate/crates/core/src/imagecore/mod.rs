//! Grayscale image container and the preprocessing operators that run ahead
//! of edge detection and ring analysis.
//!
//! Intensities are kept as real values on the 0..=255 scale and are only
//! quantized when written to disk.

mod filters;
pub mod io;

pub use filters::{gamma_correct, gaussian_blur, gaussian_kernel, hist_equalize, median_filter};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Row-major grayscale image with intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    /// Build an image from row-major pixels, checking length and range.
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::shape(
                format!("{} pixels ({}x{})", width * height, width, height),
                format!("{} pixels", pixels.len()),
            ));
        }
        let max = lit::<T>(255.0);
        if let Some(bad) = pixels.iter().position(|v| !v.is_finite() || *v < T::zero() || *v > max) {
            return Err(Error::param(format!(
                "pixel {} has intensity {} outside [0, 255]",
                bad, pixels[bad]
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// Build an image from values that are clamped into `[0, 255]`.
    /// Non-finite values become 0.
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<T>) -> Result<Self> {
        let max = lit::<T>(255.0);
        for v in pixels.iter_mut() {
            *v = if v.is_finite() {
                v.max(T::zero()).min(max)
            } else {
                T::zero()
            };
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Build from a function of `(x, y)`; values are clamped into range.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, pixels)
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&v| lit::<T>(v as f64)).collect())
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
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with edge replication outside the frame.
    #[inline]
    pub fn get_replicated(&self, x: isize, y: isize) -> T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[yc * self.width + xc]
    }

    /// Bilinear sample at a real-valued position. `None` outside the frame.
    pub fn bilinear(&self, x: T, y: T) -> Option<T> {
        let w = self.width;
        let h = self.height;
        if w == 0 || h == 0 || x < T::zero() || y < T::zero() {
            return None;
        }
        let xmax = lit::<T>((w - 1) as f64);
        let ymax = lit::<T>((h - 1) as f64);
        if x > xmax || y > ymax {
            return None;
        }
        let x0 = x.floor().to_usize()?.min(w - 1);
        let y0 = y.floor().to_usize()?.min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - lit::<T>(x0 as f64);
        let fy = y - lit::<T>(y0 as f64);
        let one = T::one();
        let top = self.get(x0, y0) * (one - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (one - fx) + self.get(x1, y1) * fx;
        Some(top * (one - fy) + bottom * fy)
    }

    /// Round and clamp to 8-bit.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| v.round().max(T::zero()).min(lit(255.0)).to_u8().unwrap_or(0))
            .collect()
    }

    /// Apply a per-pixel map; results are clamped back into range.
    pub fn map(&self, f: impl Fn(T) -> T) -> GrayImage<T> {
        let max = lit::<T>(255.0);
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v).max(T::zero()).min(max)).collect(),
        }
    }

    /// Internal constructor for operators whose output is known to be valid.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, pixels: Vec<T>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self { width, height, pixels }
    }
}

/// Preprocessing chain applied ahead of segmentation-style analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub gamma: f64,
    pub equalize: bool,
    pub median_kernel: usize,
    pub gaussian_sigma: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            gamma: 0.8,
            equalize: true,
            median_kernel: 1,
            gaussian_sigma: 0.0,
        }
    }
}

impl PreprocessConfig {
    /// A chain that leaves images untouched.
    pub fn identity() -> Self {
        Self {
            gamma: 1.0,
            equalize: false,
            median_kernel: 1,
            gaussian_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.median_kernel == 0 || self.median_kernel.is_multiple_of(2) {
            return Err(Error::param(format!(
                "median kernel must be odd and >= 1, got {}",
                self.median_kernel
            )));
        }
        if !(self.gaussian_sigma >= 0.0) {
            return Err(Error::param(format!(
                "gaussian sigma must be non-negative, got {}",
                self.gaussian_sigma
            )));
        }
        Ok(())
    }

    /// gamma -> equalize -> median -> gaussian, skipping identity stages.
    pub fn apply<T: Real>(&self, img: &GrayImage<T>) -> Result<GrayImage<T>> {
        self.validate()?;
        let mut out = img.clone();
        if self.gamma != 1.0 {
            out = gamma_correct(&out, lit(self.gamma))?;
        }
        if self.equalize {
            out = hist_equalize(&out)?;
        }
        if self.median_kernel > 1 {
            out = median_filter(&out, self.median_kernel)?;
        }
        if self.gaussian_sigma > 0.0 {
            out = gaussian_blur(&out, lit(self.gaussian_sigma))?;
        }
        Ok(out)
    }

    /// Human-readable list of the stages `apply` runs, for report metadata.
    pub fn chain(&self) -> Vec<String> {
        let mut steps = Vec::new();
        if self.gamma != 1.0 {
            steps.push(format!("gamma({})", self.gamma));
        }
        if self.equalize {
            steps.push("hist_equalize".to_string());
        }
        if self.median_kernel > 1 {
            steps.push(format!("median({})", self.median_kernel));
        }
        if self.gaussian_sigma > 0.0 {
            steps.push(format!("gaussian({})", self.gaussian_sigma));
        }
        steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_out_of_range() {
        assert!(GrayImage::<f64>::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::<f64>::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::<f64>::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::<f64>::new(1, 1, vec![-0.5]).is_err());
        assert!(GrayImage::<f32>::new(1, 1, vec![255.0]).is_ok());
    }

    #[test]
    fn bilinear_interpolates_and_bounds() {
        let img = GrayImage::<f64>::new(2, 2, vec![0.0, 100.0, 100.0, 200.0]).unwrap();
        assert_eq!(img.bilinear(0.5, 0.5), Some(100.0));
        assert_eq!(img.bilinear(1.0, 0.0), Some(100.0));
        assert_eq!(img.bilinear(0.25, 0.0), Some(25.0));
        assert_eq!(img.bilinear(1.01, 0.0), None);
        assert_eq!(img.bilinear(-0.01, 0.0), None);
    }

    #[test]
    fn preprocess_identity_chain_is_a_no_op() {
        let img = GrayImage::<f64>::from_fn(5, 4, |x, y| (x * 30 + y * 7) as f64).unwrap();
        let cfg = PreprocessConfig::identity();
        assert_eq!(cfg.apply(&img).unwrap(), img);
        assert!(cfg.chain().is_empty());
        assert_eq!(
            PreprocessConfig::default().chain(),
            vec!["gamma(0.8)".to_string(), "hist_equalize".to_string()]
        );
    }

    #[test]
    fn preprocess_rejects_bad_parameters() {
        let img = GrayImage::<f64>::filled(3, 3, 1.0).unwrap();
        let mut cfg = PreprocessConfig::identity();
        cfg.median_kernel = 2;
        assert!(cfg.apply(&img).is_err());
        cfg.median_kernel = 3;
        cfg.gamma = 0.0;
        assert!(cfg.apply(&img).is_err());
    }
}
