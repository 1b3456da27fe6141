//! Staged Canny edge detector: median denoising, Sobel gradients,
//! non-maximum suppression along the quantized gradient direction, double
//! thresholding and hysteresis tracking over 8-neighborhoods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{median_filter, GrayImage};
use crate::scalar::{lit, Real};

/// Per-pixel Sobel magnitude and orientation (`atan2(gy, gx)` in `(-pi, pi]`).
///
/// The outermost pixel ring always carries zero magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    width: usize,
    height: usize,
    magnitude: Vec<T>,
    orientation: Vec<T>,
}

impl<T: Real> GradientField<T> {
    pub fn new(width: usize, height: usize, magnitude: Vec<T>, orientation: Vec<T>) -> Result<Self> {
        let n = width * height;
        if magnitude.len() != n || orientation.len() != n {
            return Err(Error::shape(
                format!("{n} samples"),
                format!("{}/{}", magnitude.len(), orientation.len()),
            ));
        }
        if magnitude.iter().any(|m| !(*m >= T::zero()) || !m.is_finite()) {
            return Err(Error::param("gradient magnitude must be finite and non-negative"));
        }
        if orientation.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("gradient orientation must be finite"));
        }
        Ok(Self {
            width,
            height,
            magnitude,
            orientation,
        })
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
    pub fn magnitude(&self) -> &[T] {
        &self.magnitude
    }
    #[inline]
    pub fn orientation(&self) -> &[T] {
        &self.orientation
    }
    #[inline]
    pub fn magnitude_at(&self, x: usize, y: usize) -> T {
        self.magnitude[y * self.width + x]
    }
}

/// Staging label produced by double thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    None,
    Weak,
    Strong,
}

/// Final binary edge map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    width: usize,
    height: usize,
    edges: Vec<bool>,
}

impl EdgeMask {
    pub fn new(width: usize, height: usize, edges: Vec<bool>) -> Result<Self> {
        if edges.len() != width * height {
            return Err(Error::shape(width * height, edges.len()));
        }
        Ok(Self { width, height, edges })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edges: vec![false; width * height],
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
    pub fn edges(&self) -> &[bool] {
        &self.edges
    }
    #[inline]
    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }
    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// Edge pixel coordinates in raster order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// Write as PNG/PGM with 255 marking edges.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::imagecore::io::save_mask(path, self.width, self.height, &self.edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyConfig {
    /// Quantile of the non-zero suppressed magnitudes used as the strong threshold.
    pub high_quantile: f64,
    /// Weak threshold as a fraction of the strong one.
    pub low_ratio: f64,
    pub median_kernel: usize,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            high_quantile: 0.97,
            low_ratio: 0.4,
            median_kernel: 3,
        }
    }
}

impl CannyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.high_quantile > 0.0 && self.high_quantile <= 1.0) {
            return Err(Error::param(format!(
                "high_quantile must be in (0, 1], got {}",
                self.high_quantile
            )));
        }
        if !(self.low_ratio > 0.0 && self.low_ratio < 1.0) {
            return Err(Error::param(format!(
                "low_ratio must be in (0, 1), got {}",
                self.low_ratio
            )));
        }
        if self.median_kernel == 0 || self.median_kernel.is_multiple_of(2) {
            return Err(Error::param(format!(
                "median kernel must be odd and >= 1, got {}",
                self.median_kernel
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub low: T,
    pub high: T,
}

/// 3x3 Sobel gradients on interior pixels.
pub fn sobel_gradients<T: Real>(img: &GrayImage<T>) -> Result<GradientField<T>> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::param(format!("sobel needs at least 3x3, got {w}x{h}")));
    }
    let mut magnitude = vec![T::zero(); w * h];
    let mut orientation = vec![T::zero(); w * h];
    let two = lit::<T>(2.0);
    let pi = T::PI();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
            let gx = (p(1, -1) + two * p(1, 0) + p(1, 1)) - (p(-1, -1) + two * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + two * p(0, 1) + p(1, 1)) - (p(-1, -1) + two * p(0, -1) + p(1, -1));
            let i = y * w + x;
            magnitude[i] = (gx * gx + gy * gy).sqrt();
            let theta = if gx == T::zero() && gy == T::zero() {
                T::zero()
            } else {
                gy.atan2(gx)
            };
            orientation[i] = if theta <= -pi { pi } else { theta };
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        magnitude,
        orientation,
    })
}

/// Neighbor offset along the gradient direction quantized to 0, 45, 90, 135 degrees.
fn direction_offset<T: Real>(theta: T) -> (isize, isize) {
    let mut deg = theta.to_degrees();
    let half_turn = lit::<T>(180.0);
    while deg < T::zero() {
        deg = deg + half_turn;
    }
    while deg >= half_turn {
        deg = deg - half_turn;
    }
    let d = deg.to_f64().unwrap_or(0.0);
    if !(22.5..157.5).contains(&d) {
        (1, 0)
    } else if d < 67.5 {
        (1, 1)
    } else if d < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Keep a pixel iff its magnitude is `>=` both neighbors along the quantized
/// gradient direction. Out-of-frame neighbors count as zero.
pub fn nonmax_suppress<T: Real>(g: &GradientField<T>) -> GradientField<T> {
    let (w, h) = (g.width, g.height);
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            T::zero()
        } else {
            g.magnitude[y as usize * w + x as usize]
        }
    };
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = g.magnitude[i];
            if m == T::zero() {
                continue;
            }
            let (dx, dy) = direction_offset(g.orientation[i]);
            let (xi, yi) = (x as isize, y as isize);
            if m >= at(xi + dx, yi + dy) && m >= at(xi - dx, yi - dy) {
                out[i] = m;
            }
        }
    }
    GradientField {
        width: w,
        height: h,
        magnitude: out,
        orientation: g.orientation.clone(),
    }
}

/// Nearest-rank quantile of the non-zero magnitudes. `None` if all are zero.
pub fn magnitude_quantile<T: Real>(g: &GradientField<T>, q: f64) -> Option<T> {
    let mut nonzero: Vec<T> = g.magnitude.iter().copied().filter(|&m| m > T::zero()).collect();
    if nonzero.is_empty() {
        return None;
    }
    nonzero.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = nonzero.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    Some(nonzero[rank - 1])
}

/// Strong/weak thresholds derived from a config: `high` is the configured
/// quantile, `low = low_ratio * high`.
pub fn thresholds_from_config<T: Real>(g: &GradientField<T>, cfg: &CannyConfig) -> Result<Option<Thresholds<T>>> {
    cfg.validate()?;
    Ok(magnitude_quantile(g, cfg.high_quantile).map(|high| Thresholds {
        low: high * lit(cfg.low_ratio),
        high,
    }))
}

/// Double thresholding into none/weak/strong. Border pixels are never edges.
pub fn classify<T: Real>(g: &GradientField<T>, t: Thresholds<T>) -> Result<Vec<EdgeClass>> {
    if !(t.high > T::zero()) || !(t.low > T::zero()) || t.low >= t.high {
        return Err(Error::param(format!(
            "thresholds must satisfy 0 < low < high, got low={} high={}",
            t.low, t.high
        )));
    }
    let (w, h) = (g.width, g.height);
    Ok(g.magnitude
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                EdgeClass::None
            } else if m >= t.high {
                EdgeClass::Strong
            } else if m >= t.low {
                EdgeClass::Weak
            } else {
                EdgeClass::None
            }
        })
        .collect())
}

/// Hysteresis with explicit thresholds: strong pixels seed a flood fill
/// through 8-connected weak pixels.
pub fn hysteresis_with_thresholds<T: Real>(g: &GradientField<T>, t: Thresholds<T>) -> Result<EdgeMask> {
    let classes = classify(g, t)?;
    let (w, h) = (g.width, g.height);
    let mut edges = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        if *c == EdgeClass::Strong {
            edges[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && classes[j] == EdgeClass::Weak {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(EdgeMask {
        width: w,
        height: h,
        edges,
    })
}

/// Hysteresis with thresholds taken from the config. An all-zero field yields
/// an empty mask.
pub fn hysteresis<T: Real>(g: &GradientField<T>, cfg: &CannyConfig) -> Result<EdgeMask> {
    match thresholds_from_config(g, cfg)? {
        Some(t) => hysteresis_with_thresholds(g, t),
        None => Ok(EdgeMask::empty(g.width, g.height)),
    }
}

/// median -> Sobel -> NMS -> hysteresis.
pub fn canny<T: Real>(img: &GrayImage<T>, cfg: &CannyConfig) -> Result<EdgeMask> {
    cfg.validate()?;
    let denoised = median_filter(img, cfg.median_kernel)?;
    let grad = sobel_gradients(&denoised)?;
    let thin = nonmax_suppress(&grad);
    hysteresis(&thin, cfg)
}
