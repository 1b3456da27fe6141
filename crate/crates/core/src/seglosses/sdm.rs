//! Exact Euclidean distance transform and signed distance maps.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Foreground pixels having at least one 4-neighbor in the background.
/// Out-of-frame neighbors do not count as background.
pub fn boundary_pixels(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            let bg = (x > 0 && !mask[i - 1])
                || (x + 1 < width && !mask[i + 1])
                || (y > 0 && !mask[i - width])
                || (y + 1 < height && !mask[i + width]);
            out[i] = bg;
        }
    }
    out
}

/// Lower envelope of parabolas rooted at finite samples of `f`, written into
/// `out` as the 1D squared distance transform.
fn edt_1d<T: Real>(f: &[T], out: &mut [T], sites: &mut Vec<usize>, breaks: &mut Vec<T>) {
    let n = f.len();
    sites.clear();
    breaks.clear();
    let sq = |q: usize| {
        let qf = lit::<T>(q as f64);
        qf * qf
    };
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let Some(&v) = sites.last() else {
                sites.push(q);
                breaks.push(T::neg_infinity());
                break;
            };
            let s = ((f[q] + sq(q)) - (f[v] + sq(v))) / (lit::<T>(2.0) * lit::<T>(q as f64 - v as f64));
            if s <= *breaks.last().expect("parallel to sites") {
                sites.pop();
                breaks.pop();
                continue;
            }
            sites.push(q);
            breaks.push(s);
            break;
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = T::infinity());
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = lit::<T>(q as f64);
        while k + 1 < sites.len() && breaks[k + 1] < qf {
            k += 1;
        }
        let v = sites[k];
        let d = qf - lit::<T>(v as f64);
        *o = d * d + f[v];
    }
}

/// Exact Euclidean distance from every pixel to the nearest `feature` pixel,
/// by two separable passes of the squared-distance lower envelope.
/// Pixels are `+inf` when there is no feature at all.
pub fn euclidean_distance_transform<T: Real>(feature: &[bool], width: usize, height: usize) -> Vec<T> {
    let mut grid: Vec<T> = feature
        .iter()
        .map(|&f| if f { T::zero() } else { T::infinity() })
        .collect();
    let mut sites = Vec::new();
    let mut breaks = Vec::new();

    let mut col = vec![T::zero(); height];
    let mut col_out = vec![T::zero(); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = grid[y * width + x];
        }
        edt_1d(&col, &mut col_out, &mut sites, &mut breaks);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![T::zero(); width];
    for y in 0..height {
        let row = &grid[y * width..(y + 1) * width];
        edt_1d(row, &mut row_out, &mut sites, &mut breaks);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid.into_iter().map(|d2| d2.sqrt()).collect()
}

/// Signed distance to the region boundary: negative inside, positive
/// outside, zero on the boundary pixels themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> SignedDistanceMap<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    /// Binary grid: magic `SDM1`, little-endian u32 width and height, then
    /// row-major little-endian f32 values.
    pub fn write_f32_grid(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(12 + self.values.len() * 4);
        buf.extend_from_slice(b"SDM1");
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&(v.to_f32().unwrap_or(f32::NAN)).to_le_bytes());
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    /// Read a grid written by [`write_f32_grid`](Self::write_f32_grid).
    pub fn read_f32_grid(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 12 || &bytes[..4] != b"SDM1" {
            return Err(Error::Serde(format!("{}: not an SDM1 grid", path.display())));
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let height = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 12 + width * height * 4 {
            return Err(Error::Serde(format!("{}: truncated SDM1 grid", path.display())));
        }
        let values = bytes[12..]
            .chunks_exact(4)
            .map(|c| lit::<T>(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        Ok(Self { width, height, values })
    }
}

/// Signed distance map of a binary region.
///
/// Fails when the mask is entirely foreground or entirely background, since
/// the boundary is then empty.
pub fn signed_distance_map<T: Real>(mask: &[bool], width: usize, height: usize) -> Result<SignedDistanceMap<T>> {
    if mask.len() != width * height {
        return Err(Error::shape(width * height, mask.len()));
    }
    let fg = mask.iter().filter(|&&m| m).count();
    if fg == 0 || fg == mask.len() {
        return Err(Error::Degenerate(format!(
            "signed distance map needs both foreground and background ({fg} of {} pixels set)",
            mask.len()
        )));
    }
    let boundary = boundary_pixels(mask, width, height);
    let dist = euclidean_distance_transform::<T>(&boundary, width, height);
    let values = dist
        .into_iter()
        .zip(mask)
        .map(|(d, &inside)| if inside { -d } else { d })
        .collect();
    Ok(SignedDistanceMap { width, height, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_pixel() {
        let mut m = vec![false; 9];
        m[4] = true;
        let s = signed_distance_map::<f64>(&m, 3, 3).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        let expect = [r2, 1.0, r2, 1.0, 0.0, 1.0, r2, 1.0, r2];
        for (a, b) in s.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn left_block_interior_column_is_negative() {
        let m: Vec<bool> = (0..16).map(|i| i % 4 < 2).collect();
        let s = signed_distance_map::<f64>(&m, 4, 4).unwrap();
        for y in 0..4 {
            assert_eq!(s.get(0, y), -1.0);
            assert_eq!(s.get(1, y), 0.0);
            assert_eq!(s.get(2, y), 1.0);
            assert_eq!(s.get(3, y), 2.0);
        }
    }

    #[test]
    fn zero_exactly_on_boundary() {
        let m: Vec<bool> = (0..100)
            .map(|i| {
                let (x, y) = (i % 10, i / 10);
                (2..7).contains(&x) && (3..9).contains(&y)
            })
            .collect();
        let s = signed_distance_map::<f64>(&m, 10, 10).unwrap();
        let b = boundary_pixels(&m, 10, 10);
        for i in 0..100 {
            assert_eq!(s.values()[i] == 0.0, b[i]);
        }
    }

    #[test]
    fn degenerate_masks_error() {
        assert!(matches!(
            signed_distance_map::<f64>(&[true; 4], 2, 2),
            Err(Error::Degenerate(_))
        ));
        assert!(signed_distance_map::<f64>(&[false; 4], 2, 2).is_err());
        assert!(signed_distance_map::<f64>(&[false; 3], 2, 2).is_err());
    }

    #[test]
    fn edt_without_features_is_infinite() {
        let d = euclidean_distance_transform::<f64>(&[false; 6], 3, 2);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn f32_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m: Vec<bool> = (0..35).map(|i| i % 7 > 3).collect();
        let s = signed_distance_map::<f64>(&m, 7, 5).unwrap();
        let p = dir.path().join("s.sdm");
        s.write_f32_grid(&p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 12 + 35 * 4);
        let back = SignedDistanceMap::<f64>::read_f32_grid(&p).unwrap();
        assert_eq!(back.width(), 7);
        for (a, b) in back.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
