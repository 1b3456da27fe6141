//! Software pipeline for a combined fundus / photorefraction screening device.
//!
//! - [`imagecore`]: grayscale images, preprocessing filters, PNG/PGM I/O.
//! - [`edgedetect`]: Canny edge detection.
//! - [`pupilgeom`]: closed-contour tracing and pupil center estimation.
//! - [`seglosses`]: segmentation losses, signed distance maps, gradients.
//! - [`evalmetrics`]: localization, segmentation and image-quality metrics.
//! - [`ringrefraction`]: photorefraction ring scanning, ellipse fitting and
//!   the linear diopter model.
//! - [`synthgen`]: deterministic synthetic ground-truth images and corpora.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod edgedetect;
pub mod error;
pub mod evalmetrics;
pub mod imagecore;
pub mod labels;
pub mod pupilgeom;
pub mod ringrefraction;
pub mod scalar;
pub mod seglosses;
pub mod synthgen;

pub use error::{Error, Result};
pub use labels::{EyeClass, LabelMask, OneHotMask};
pub use scalar::Real;

pub type GrayImage = imagecore::GrayImage<f64>;
pub type GrayImageF32 = imagecore::GrayImage<f32>;
pub type GradientField = edgedetect::GradientField<f64>;
pub type ProbMap = seglosses::ProbMap<f64>;
pub type ProbMapF32 = seglosses::ProbMap<f32>;
pub type SignedDistanceMap = seglosses::SignedDistanceMap<f64>;
pub type PupilEstimate = pupilgeom::PupilEstimate<f64>;
pub type QualityReport = evalmetrics::QualityReport<f64>;
pub type RingGeometry = ringrefraction::RingGeometry<f64>;
pub type RefractionModel = ringrefraction::RefractionModel<f64>;
