use super::GrayImage;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

/// Power-law mapping `255 * (v / 255)^gamma`.
pub fn gamma_correct<T: Real>(img: &GrayImage<T>, gamma: T) -> Result<GrayImage<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if gamma == T::one() {
        return Ok(img.clone());
    }
    let full = lit::<T>(255.0);
    Ok(img.map(|v| full * (v / full).powf(gamma)))
}

/// Histogram equalization through the empirical CDF over 256 bins.
///
/// Each pixel maps to `255 * CDF(bin)`, where `CDF(k)` is the fraction of
/// pixels whose rounded intensity is `<= k`. A constant image therefore maps
/// to 255 everywhere.
pub fn hist_equalize<T: Real>(img: &GrayImage<T>) -> Result<GrayImage<T>> {
    if img.is_empty() {
        return Err(Error::param("histogram equalization of an empty image"));
    }
    let bins = img.to_u8();
    let mut hist = [0usize; 256];
    for &b in &bins {
        hist[b as usize] += 1;
    }
    let n = from_usize::<T>(bins.len());
    let full = lit::<T>(255.0);
    let mut lut = [T::zero(); 256];
    let mut acc = 0usize;
    for (k, &count) in hist.iter().enumerate() {
        acc += count;
        lut[k] = full * from_usize::<T>(acc) / n;
    }
    let pixels = bins.iter().map(|&b| lut[b as usize]).collect();
    Ok(GrayImage::from_parts_unchecked(img.width(), img.height(), pixels))
}

/// Median over a `kernel x kernel` window with edge replication.
pub fn median_filter<T: Real>(img: &GrayImage<T>, kernel: usize) -> Result<GrayImage<T>> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::param(format!(
            "median kernel must be odd and >= 1, got {kernel}"
        )));
    }
    if kernel == 1 || img.is_empty() {
        return Ok(img.clone());
    }
    let r = (kernel / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut window = Vec::with_capacity(kernel * kernel);
    let mut out = Vec::with_capacity(w * h);
    let mid = kernel * kernel / 2;
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    window.push(img.get_replicated(x + dx, y + dy));
                }
            }
            let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite pixels"));
            out.push(*m);
        }
    }
    Ok(GrayImage::from_parts_unchecked(w, h, out))
}

/// Normalized 1D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel<T: Real>(sigma: T) -> Vec<T> {
    if sigma <= T::zero() {
        return vec![T::one()];
    }
    let radius = (lit::<T>(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_s2 = lit::<T>(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = lit::<T>(i as f64 - radius as f64);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let total = pairwise_sum(&raw);
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur with edge replication. `sigma = 0` is the identity.
pub fn gaussian_blur<T: Real>(img: &GrayImage<T>, sigma: T) -> Result<GrayImage<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::param(format!(
            "gaussian sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == T::zero() || img.is_empty() {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());

    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * img.get_replicated(x + k as isize - r, y as isize);
            }
            tmp[y * w + x as usize] = acc;
        }
    }
    let horizontal = GrayImage::from_parts_unchecked(w, h, tmp);
    let max = lit::<T>(255.0);
    let mut out = vec![T::zero(); w * h];
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * horizontal.get_replicated(x as isize, y + k as isize - r);
            }
            out[y as usize * w + x] = acc.max(T::zero()).min(max);
        }
    }
    Ok(GrayImage::from_parts_unchecked(w, h, out))
}
