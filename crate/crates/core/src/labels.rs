//! Per-pixel class labels shared by the loss, metric and synthesis modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four eye-surface classes used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum EyeClass {
    Background = 0,
    Sclera = 1,
    Pupil = 2,
    Iris = 3,
}

impl EyeClass {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Row-major label image. Doubles as a one-hot mask: `y[i][c] = (labels[i] == c)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelMask")]
pub struct LabelMask {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u8>,
}

/// One-hot ground truth is a label mask viewed class by class.
pub type OneHotMask = LabelMask;

#[derive(Deserialize)]
struct RawLabelMask {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u8>,
}

impl TryFrom<RawLabelMask> for LabelMask {
    type Error = Error;
    fn try_from(r: RawLabelMask) -> Result<Self> {
        LabelMask::new(r.width, r.height, r.num_classes, r.labels)
    }
}

impl LabelMask {
    pub fn new(width: usize, height: usize, num_classes: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::shape(
                format!("{} labels ({}x{})", width * height, width, height),
                format!("{} labels", labels.len()),
            ));
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::param(format!(
                "num_classes must be in 1..=256, got {num_classes}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::param(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            width,
            height,
            num_classes,
            labels,
        })
    }

    /// Build from rows (mostly for tests and small fixtures).
    pub fn from_rows(rows: &[&[u8]], num_classes: usize) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::param("ragged rows"));
        }
        Self::new(width, height, num_classes, rows.concat())
    }

    /// Binary foreground mask as a two-class label mask.
    pub fn from_binary(width: usize, height: usize, mask: &[bool]) -> Result<Self> {
        Self::new(width, height, 2, mask.iter().map(|&m| m as u8).collect())
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
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    #[inline]
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// `y[i][c]` as 0/1.
    #[inline]
    pub fn indicator(&self, pixel: usize, class: usize) -> bool {
        self.labels[pixel] as usize == class
    }

    pub fn class_mask(&self, class: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l as usize == class).collect()
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l as usize == class).count()
    }

    pub fn same_shape(&self, other: &LabelMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Load from PNG/PGM where pixel values are class indices.
    pub fn load_image(path: impl AsRef<std::path::Path>, num_classes: usize) -> Result<Self> {
        let (w, h, data) = crate::imagecore::io::load_luma8(path)?;
        Self::new(w, h, num_classes, data)
    }

    pub fn save_image(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::imagecore::io::save_luma8(path, self.width, self.height, &self.labels)
    }
}
