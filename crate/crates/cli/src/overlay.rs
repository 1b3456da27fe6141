//! RGB overlays drawn over grayscale inputs.

use std::path::Path;

use eyescreen::imagecore::io::save_rgb_png;
use eyescreen::GrayImage;

pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 128, 255];
pub const YELLOW: [u8; 3] = [255, 220, 0];

pub struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    pub fn from_gray(img: &GrayImage) -> Self {
        let rgb = img.to_u8().iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: img.width(),
            height: img.height(),
            rgb,
        }
    }

    pub fn set(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    /// Bresenham line between rounded endpoints.
    pub fn line(&mut self, from: (f64, f64), to: (f64, f64), color: [u8; 3]) {
        let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
        let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.set(x0, y0, color);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    pub fn cross(&mut self, at: (f64, f64), half: f64, color: [u8; 3]) {
        self.line((at.0 - half, at.1), (at.0 + half, at.1), color);
        self.line((at.0, at.1 - half), (at.0, at.1 + half), color);
    }

    pub fn ellipse(&mut self, center: (f64, f64), a: f64, b: f64, rotation: f64, color: [u8; 3]) {
        let n = 720;
        let point = |i: usize| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let (x, y) = (a * t.cos(), b * t.sin());
            (
                center.0 + x * rotation.cos() - y * rotation.sin(),
                center.1 + x * rotation.sin() + y * rotation.cos(),
            )
        };
        for i in 0..n {
            self.line(point(i), point(i + 1), color);
        }
    }

    pub fn save(&self, path: &Path) -> eyescreen::Result<()> {
        save_rgb_png(path, self.width, self.height, &self.rgb)
    }
}
