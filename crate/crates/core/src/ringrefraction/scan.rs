//! Radial ray scanning of ring images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

/// One ray's measurement of the ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaySample<T> {
    pub angle: T,
    /// Weighted intensity centroid of the above-threshold band.
    pub peak_point: (T, T),
    /// Extent of the above-threshold band along the ray, px.
    pub width: T,
    /// Distance from the scan center to `peak_point`.
    pub radius: T,
    pub peak_value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub n_rays: usize,
    /// Sampling step along each ray, px.
    pub step: f64,
    /// Band threshold relative to the ray's own peak.
    pub peak_fraction: f64,
    /// Rays whose peak is not above `mean + floor_sigmas * sd` of the tails
    /// are dropped.
    pub floor_sigmas: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n_rays: 360,
            step: 0.5,
            peak_fraction: 0.5,
            floor_sigmas: 2.0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rays < 8 {
            return Err(Error::param(format!("n_rays must be at least 8, got {}", self.n_rays)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::param(format!("ray step must be positive, got {}", self.step)));
        }
        if !(self.peak_fraction > 0.0 && self.peak_fraction < 1.0) {
            return Err(Error::param(format!(
                "peak_fraction must lie in (0, 1), got {}",
                self.peak_fraction
            )));
        }
        if !(self.floor_sigmas >= 0.0 && self.floor_sigmas.is_finite()) {
            return Err(Error::param(format!(
                "floor_sigmas must be non-negative, got {}",
                self.floor_sigmas
            )));
        }
        Ok(())
    }
}

/// Bilinear intensity profile from `center` along `dir` until the ray leaves
/// the frame.
fn ray_profile<T: Real>(img: &GrayImage<T>, center: (T, T), dir: (T, T), step: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = from_usize::<T>(k) * step;
        match img.bilinear(center.0 + dir.0 * t, center.1 + dir.1 * t) {
            Some(v) => out.push(v),
            None => break,
        }
        k += 1;
    }
    out
}

/// Position where the line through `(i0, p0)`, `(i1, p1)` reaches `thr`.
fn crossing<T: Real>(i0: usize, p0: T, i1: usize, p1: T, thr: T) -> T {
    let (x0, x1) = (from_usize::<T>(i0), from_usize::<T>(i1));
    if p1 == p0 {
        return (x0 + x1) / lit(2.0);
    }
    x0 + (thr - p0) / (p1 - p0) * (x1 - x0)
}

#[derive(Debug, Clone, Copy)]
struct Band<T> {
    /// Fractional sample positions of the threshold crossings.
    left: T,
    right: T,
    /// Centroid position in sample units.
    centroid: T,
    /// First and last sample indices inside the band.
    lo: usize,
    hi: usize,
    peak: T,
}

/// Locate the above-threshold band around the global maximum of a profile
/// and its centroid. The centroid weights the piecewise-linear profile by
/// its excess over the threshold, integrated exactly between the crossings.
fn analyze_profile<T: Real>(p: &[T], fraction: T) -> Option<Band<T>> {
    if p.len() < 3 {
        return None;
    }
    let mut kmax = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[kmax] {
            kmax = i;
        }
    }
    let peak = p[kmax];
    if !(peak > T::zero()) {
        return None;
    }
    let thr = fraction * peak;
    let mut lo = kmax;
    while lo > 0 && p[lo - 1] >= thr {
        lo -= 1;
    }
    let mut hi = kmax;
    while hi + 1 < p.len() && p[hi + 1] >= thr {
        hi += 1;
    }
    // A band touching either end of the profile has no measurable edge.
    if lo == 0 || hi + 1 == p.len() {
        return None;
    }
    let left = crossing(lo - 1, p[lo - 1], lo, p[lo], thr);
    let right = crossing(hi, p[hi], hi + 1, p[hi + 1], thr);

    // Knots of the excess function (p - thr)+ between the crossings.
    let mut knots: Vec<(T, T)> = Vec::with_capacity(hi - lo + 3);
    knots.push((left, T::zero()));
    for (i, &v) in p.iter().enumerate().take(hi + 1).skip(lo) {
        knots.push((from_usize::<T>(i), v - thr));
    }
    knots.push((right, T::zero()));
    let mut mass = Vec::with_capacity(knots.len());
    let mut moment = Vec::with_capacity(knots.len());
    let (two, six) = (lit::<T>(2.0), lit::<T>(6.0));
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let dx = x1 - x0;
        mass.push(dx * (y0 + y1) / two);
        // Exact first moment of a linear segment.
        moment.push(dx * (y0 * (two * x0 + x1) + y1 * (x0 + two * x1)) / six);
    }
    let m0 = pairwise_sum(&mass);
    let centroid = if m0 > T::zero() {
        pairwise_sum(&moment) / m0
    } else {
        from_usize::<T>(kmax)
    };
    Some(Band {
        left,
        right,
        centroid,
        lo,
        hi,
        peak,
    })
}

fn mean_sd<T: Real>(v: &[T]) -> (T, T) {
    let n = from_usize::<T>(v.len());
    let mean = pairwise_sum(v) / n;
    let dev: Vec<T> = v.iter().map(|&x| (x - mean) * (x - mean)).collect();
    (mean, (pairwise_sum(&dev) / n).sqrt())
}

/// Measure a single ray. `None` when the ray carries no ring signal.
pub fn scan_ray<T: Real>(img: &GrayImage<T>, center: (T, T), angle: T, cfg: &ScanConfig) -> Option<RaySample<T>> {
    let step = lit::<T>(cfg.step);
    let dir = (angle.cos(), angle.sin());
    let p = ray_profile(img, center, dir, step);
    let band = analyze_profile(&p, lit(cfg.peak_fraction))?;

    // Tails: samples farther from the band than its own length.
    let span = band.hi - band.lo + 1;
    let inner_end = band.lo.saturating_sub(span);
    let outer_start = (band.hi + 1 + span).min(p.len());
    let tails: Vec<T> = p[..inner_end].iter().chain(&p[outer_start..]).copied().collect();
    if tails.len() < 2 {
        return None;
    }
    let (mean, sd) = mean_sd(&tails);
    if !(band.peak > mean + lit::<T>(cfg.floor_sigmas) * sd) {
        return None;
    }
    let radius = band.centroid * step;
    Some(RaySample {
        angle,
        peak_point: (center.0 + dir.0 * radius, center.1 + dir.1 * radius),
        width: (band.right - band.left) * step,
        radius,
        peak_value: band.peak,
    })
}

/// Cast `cfg.n_rays` evenly spaced rays from `center` and measure the ring on
/// each. Fails when fewer than half of the rays are valid.
pub fn radial_scan<T: Real>(img: &GrayImage<T>, center: (T, T), cfg: &ScanConfig) -> Result<Vec<RaySample<T>>> {
    cfg.validate()?;
    if img.bilinear(center.0, center.1).is_none() {
        return Err(Error::param(format!(
            "scan center ({}, {}) outside the {}x{} image",
            center.0,
            center.1,
            img.width(),
            img.height()
        )));
    }
    let n = cfg.n_rays;
    let samples: Vec<RaySample<T>> = (0..n)
        .filter_map(|i| {
            let angle = T::TAU() * from_usize::<T>(i) / from_usize::<T>(n);
            scan_ray(img, center, angle, cfg)
        })
        .collect();
    let required = n.div_ceil(2);
    if samples.len() < required {
        return Err(Error::InsufficientSignal {
            valid: samples.len(),
            required,
        });
    }
    Ok(samples)
}
