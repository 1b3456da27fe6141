//! Pupil contour extraction and center estimation from a Canny edge map.
//!
//! Non-edge pixels are grouped into 4-connected regions. Regions that do not
//! touch the frame are enclosed by edges; for each one the surrounding edge
//! pixels are traced with Moore-neighbor tracing into a closed contour. The
//! smallest enclosed region whose contour is long enough is taken as the
//! pupil, and its filled centroid is the pupil center.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::edgedetect::{canny, CannyConfig, EdgeMask};
use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::scalar::{from_usize, lit, sum_iter, Real};

/// Minimum traced length for a contour to count as a pupil candidate.
pub const DEFAULT_MIN_CONTOUR_LENGTH: usize = 100;

/// Clockwise 8-neighborhood starting at north (image y grows downward).
const MOORE_DIRS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
const WEST: usize = 6;

fn dir_index(dx: isize, dy: isize) -> usize {
    MOORE_DIRS.iter().position(|&d| d == (dx, dy)).expect("unit offset")
}

/// Ordered boundary walk. Consecutive points are 8-neighbors; when `closed`
/// the last point is also adjacent to the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
    pub closed: bool,
}

impl Contour {
    pub fn length(&self) -> usize {
        self.points.len()
    }

    /// Topmost-leftmost point, as `(y, x)` for ordering.
    pub fn start_key(&self) -> (usize, usize) {
        self.points
            .iter()
            .map(|&(x, y)| (y, x))
            .min()
            .unwrap_or((usize::MAX, usize::MAX))
    }

    /// Every consecutive pair (wraparound included when closed) is 8-adjacent.
    pub fn is_chain_consistent(&self) -> bool {
        let adj = |a: (usize, usize), b: (usize, usize)| {
            let dx = a.0.abs_diff(b.0);
            let dy = a.1.abs_diff(b.1);
            dx <= 1 && dy <= 1 && (dx + dy) > 0
        };
        let pts = &self.points;
        if pts.len() < 2 {
            return !self.closed;
        }
        let inner = pts.windows(2).all(|w| adj(w[0], w[1]));
        inner && (!self.closed || adj(pts[pts.len() - 1], pts[0]))
    }

    /// Inclusive bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let first = *self.points.first()?;
        Some(
            self.points
                .iter()
                .fold((first.0, first.1, first.0, first.1), |(x0, y0, x1, y1), &(x, y)| {
                    (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
                }),
        )
    }
}

/// Moore-neighbor tracing of the blob containing `start`, which must be the
/// blob's first pixel in raster order. Stops by Jacob's criterion.
fn moore_trace(mask: &[bool], width: usize, height: usize, start: (usize, usize)) -> Vec<(usize, usize)> {
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height && mask[y as usize * width + x as usize]
    };
    let start_i = (start.0 as isize, start.1 as isize);
    let mut points = vec![start];
    let mut cur = start_i;
    let mut back = WEST;
    let initial_back = (start_i.0 - 1, start_i.1);
    let limit = 4 * mask.len() + 8;
    for _ in 0..limit {
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dx, dy) = MOORE_DIRS[d];
            let p = (cur.0 + dx, cur.1 + dy);
            if inside(p.0, p.1) {
                let (pdx, pdy) = MOORE_DIRS[(back + k - 1) % 8];
                let prev = (cur.0 + pdx, cur.1 + pdy);
                found = Some((p, prev));
                break;
            }
        }
        let Some((next, prev)) = found else {
            return points;
        };
        if next == start_i && prev == initial_back {
            break;
        }
        back = dir_index(prev.0 - next.0, prev.1 - next.1);
        cur = next;
        points.push((next.0 as usize, next.1 as usize));
    }
    if points.len() > 1 && points.last() == Some(&start) {
        points.pop();
    }
    points
}

/// Trace the outer boundary of the first blob (raster order) of `mask`.
pub fn trace_boundary(mask: &[bool], width: usize, height: usize) -> Option<Contour> {
    let first = mask.iter().position(|&m| m)?;
    let points = moore_trace(mask, width, height, (first % width, first / width));
    Some(Contour {
        closed: points.len() >= 3,
        points,
    })
}

/// All edge-enclosed regions' contours, before any length filtering.
pub fn trace_enclosed_contours(edges: &EdgeMask) -> Vec<Contour> {
    let (w, h) = (edges.width(), edges.height());
    let e = edges.edges();
    let mut region = vec![usize::MAX; w * h];
    let mut contours = Vec::new();
    let mut blob = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for seed in 0..w * h {
        if e[seed] || region[seed] != usize::MAX {
            continue;
        }
        let id = seed;
        region[seed] = id;
        queue.push_back(seed);
        members.clear();
        let mut touches_frame = false;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches_frame = true;
            }
            let mut visit = |j: usize| {
                if !e[j] && region[j] == usize::MAX {
                    region[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if touches_frame {
            continue;
        }

        // Hole plus its 8-adjacent edge pixels.
        let mut touched = Vec::with_capacity(members.len() * 2);
        for &i in &members {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            blob[i] = true;
            touched.push(i);
            for (dx, dy) in MOORE_DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if e[j] && !blob[j] {
                    blob[j] = true;
                    touched.push(j);
                }
            }
        }
        let first = *touched.iter().min().expect("non-empty hole");
        let points = moore_trace(&blob, w, h, (first % w, first / w));
        for &i in &touched {
            blob[i] = false;
        }
        contours.push(Contour {
            closed: points.len() >= 3,
            points,
        });
    }
    contours
}

/// Closed contours around edge-enclosed regions with length `>= min_length`.
pub fn extract_closed_contours(edges: &EdgeMask, min_length: usize) -> Vec<Contour> {
    trace_enclosed_contours(edges)
        .into_iter()
        .filter(|c| c.closed && c.length() >= min_length)
        .collect()
}

/// Pixels of the even-odd scanline fill of a closed contour (sampled at
/// pixel centers), together with the contour pixels themselves. Raster order.
pub fn fill_contour(contour: &Contour) -> Vec<(usize, usize)> {
    let Some((x0, y0, x1, y1)) = contour.bounding_box() else {
        return Vec::new();
    };
    let bw = x1 - x0 + 1;
    let bh = y1 - y0 + 1;
    let mut filled = vec![false; bw * bh];
    for &(x, y) in &contour.points {
        filled[(y - y0) * bw + (x - x0)] = true;
    }
    let pts = &contour.points;
    let n = pts.len();
    if contour.closed && n >= 3 {
        let mut crossings: Vec<f64> = Vec::new();
        for y in y0..=y1 {
            crossings.clear();
            let yf = y as f64;
            for k in 0..n {
                let (ax, ay) = pts[k];
                let (bx, by) = pts[(k + 1) % n];
                if ay == by {
                    continue;
                }
                let (lo, hi) = (ay.min(by), ay.max(by));
                if lo <= y && y < hi {
                    let t = (yf - ay as f64) / (by as f64 - ay as f64);
                    crossings.push(ax as f64 + t * (bx as f64 - ax as f64));
                }
            }
            crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            for pair in crossings.chunks_exact(2) {
                let from = pair[0].ceil().max(x0 as f64) as usize;
                let to = pair[1].floor().min(x1 as f64) as usize;
                if from <= to {
                    for x in from..=to {
                        filled[(y - y0) * bw + (x - x0)] = true;
                    }
                }
            }
        }
    }
    filled
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| (x0 + i % bw, y0 + i / bw))
        .collect()
}

/// Filled area of a contour in pixels.
pub fn contour_area(contour: &Contour) -> usize {
    fill_contour(contour).len()
}

/// The closed contour with the smallest filled area; ties go to the shorter
/// contour, then to the topmost-leftmost start.
pub fn smallest_valid_region(contours: &[Contour]) -> Result<&Contour> {
    contours
        .iter()
        .filter(|c| c.closed)
        .map(|c| ((contour_area(c), c.length(), c.start_key()), c))
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(_, c)| c)
        .ok_or_else(|| Error::NotFound("no closed contour to choose from".into()))
}

/// Mean pixel coordinate of a region.
pub fn centroid<T: Real>(region: &[(usize, usize)]) -> Result<(T, T)> {
    if region.is_empty() {
        return Err(Error::param("centroid of an empty region"));
    }
    let n = from_usize::<T>(region.len());
    let sx = sum_iter(region.iter().map(|&(x, _)| from_usize::<T>(x)));
    let sy = sum_iter(region.iter().map(|&(_, y)| from_usize::<T>(y)));
    Ok((sx / n, sy / n))
}

/// Pupil center, equivalent-area radius and the contour it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PupilEstimate<T> {
    pub center: (T, T),
    pub radius: T,
    pub contour: Contour,
    pub region_area: usize,
}

impl<T: Real> PupilEstimate<T> {
    /// Estimate from a filled region and its contour.
    pub fn from_region(region: &[(usize, usize)], contour: Contour) -> Result<Self> {
        let center = centroid(region)?;
        let area = region.len();
        Ok(Self {
            center,
            radius: (from_usize::<T>(area) / T::PI()).sqrt(),
            contour,
            region_area: area,
        })
    }

    /// Flat JSON record: `{cx, cy, radius_px, radius_mm?, contour_length, area_px}`.
    pub fn report(&self, scale: Option<&ScaleCalibration<T>>) -> PupilReport<T> {
        PupilReport {
            cx: self.center.0,
            cy: self.center.1,
            radius_px: self.radius,
            radius_mm: scale.map(|s| s.to_mm(self.radius)),
            contour_length: self.contour.length(),
            area_px: self.region_area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PupilReport<T> {
    pub cx: T,
    pub cy: T,
    pub radius_px: T,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub radius_mm: Option<T>,
    pub contour_length: usize,
    pub area_px: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateConfig {
    pub canny: CannyConfig,
    pub min_contour_length: usize,
}

impl Default for LocateConfig {
    fn default() -> Self {
        Self {
            canny: CannyConfig::default(),
            min_contour_length: DEFAULT_MIN_CONTOUR_LENGTH,
        }
    }
}

/// canny -> closed contours -> smallest valid region -> fill -> centroid.
pub fn locate_pupil<T: Real>(img: &GrayImage<T>, cfg: &LocateConfig) -> Result<PupilEstimate<T>> {
    let edges = canny(img, &cfg.canny)?;
    locate_pupil_in_edges(&edges, cfg.min_contour_length)
}

/// The geometric half of [`locate_pupil`], starting from an edge map.
pub fn locate_pupil_in_edges<T: Real>(edges: &EdgeMask, min_length: usize) -> Result<PupilEstimate<T>> {
    let all = trace_enclosed_contours(edges);
    let total = all.len();
    let valid: Vec<Contour> = all
        .into_iter()
        .filter(|c| c.closed && c.length() >= min_length)
        .collect();
    if valid.is_empty() {
        return Err(Error::NotFound(format!(
            "no closed contour of length >= {min_length} ({total} shorter contours discarded)"
        )));
    }
    let best = smallest_valid_region(&valid)?.clone();
    let region = fill_contour(&best);
    PupilEstimate::from_region(&region, best)
}

/// Frame center `(width / 2, height / 2)`.
pub fn image_center<T: Real>(width: usize, height: usize) -> (T, T) {
    (from_usize::<T>(width) / lit(2.0), from_usize::<T>(height) / lit(2.0))
}

/// Displacement that moves the pupil center onto `target`.
pub fn alignment_offset<T: Real>(estimate: &PupilEstimate<T>, target: (T, T)) -> (T, T) {
    (target.0 - estimate.center.0, target.1 - estimate.center.1)
}

/// Pixel-to-millimetre scale from a reference object of known size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration<T> {
    pub mm_per_px: T,
}

impl<T: Real> ScaleCalibration<T> {
    pub fn to_mm(&self, px: T) -> T {
        px * self.mm_per_px
    }
}

pub fn calibrate_scale<T: Real>(reference_px: T, reference_mm: T) -> Result<ScaleCalibration<T>> {
    if !(reference_px > T::zero()) || !(reference_mm > T::zero()) {
        return Err(Error::param(format!(
            "reference sizes must be positive, got {reference_px} px / {reference_mm} mm"
        )));
    }
    Ok(ScaleCalibration {
        mm_per_px: reference_mm / reference_px,
    })
}
