//! Linear ring-feature / diopter model and its least-squares calibration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

pub const PUBLISHED_SLOPE: f64 = 0.1136;
pub const PUBLISHED_INTERCEPT: f64 = 24.4738;
/// Feature units per pixel assumed for the published coefficients.
pub const DEFAULT_FEATURE_SCALE: f64 = 0.1;

/// `R(D) = slope * D + intercept`, valid for features measured at
/// `feature_scale` units per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefractionModel<T> {
    pub slope: T,
    pub intercept: T,
    pub feature_scale: T,
    #[serde(default)]
    pub fitted_on: Vec<(T, T)>,
    #[serde(default)]
    pub r2: Option<T>,
}

impl<T: Real> RefractionModel<T> {
    pub fn new(slope: T, intercept: T, feature_scale: T) -> Result<Self> {
        let m = Self {
            slope,
            intercept,
            feature_scale,
            fitted_on: Vec::new(),
            r2: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// The published coefficients at [`DEFAULT_FEATURE_SCALE`].
    pub fn published() -> Self {
        Self {
            slope: lit(PUBLISHED_SLOPE),
            intercept: lit(PUBLISHED_INTERCEPT),
            feature_scale: lit(DEFAULT_FEATURE_SCALE),
            fitted_on: Vec::new(),
            r2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.slope.is_finite() || self.slope == T::zero() {
            return Err(Error::Model(format!(
                "slope must be finite and nonzero, got {}",
                self.slope
            )));
        }
        if !self.intercept.is_finite() {
            return Err(Error::Model(format!(
                "intercept must be finite, got {}",
                self.intercept
            )));
        }
        if !(self.feature_scale > T::zero() && self.feature_scale.is_finite()) {
            return Err(Error::Model(format!(
                "feature_scale must be positive, got {}",
                self.feature_scale
            )));
        }
        Ok(())
    }

    /// Ring feature predicted for `diopters`.
    pub fn forward(&self, diopters: T) -> T {
        self.slope * diopters + self.intercept
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `D = (R - intercept) / slope`.
pub fn refraction_from_feature<T: Real>(feature: T, model: &RefractionModel<T>) -> Result<T> {
    if model.slope == T::zero() || !model.slope.is_finite() {
        return Err(Error::Model(format!(
            "cannot invert a model with slope {}",
            model.slope
        )));
    }
    Ok((feature - model.intercept) / model.slope)
}

/// Fitted model plus goodness-of-fit figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration<T> {
    pub model: RefractionModel<T>,
    /// `|R_i - R(D_i)|` per calibration pair.
    pub abs_errors: Vec<T>,
    pub mean_abs_error: T,
}

/// Ordinary least-squares fit of `R = slope * D + intercept` to `(D, R)`
/// pairs.
pub fn fit_refraction_model<T: Real>(pairs: &[(T, T)], feature_scale: T) -> Result<Calibration<T>> {
    if pairs.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::param("calibration pairs must be finite"));
    }
    let distinct = {
        let mut d: Vec<T> = pairs.iter().map(|p| p.0).collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        d.dedup();
        d.len()
    };
    if distinct < 2 {
        return Err(Error::param(format!(
            "calibration needs at least 2 distinct diopter values, got {distinct}"
        )));
    }
    let n = from_usize::<T>(pairs.len());
    let ds: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let rs: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let (md, mr) = (pairwise_sum(&ds) / n, pairwise_sum(&rs) / n);
    let sdd: Vec<T> = ds.iter().map(|&d| (d - md) * (d - md)).collect();
    let sdr: Vec<T> = pairs.iter().map(|&(d, r)| (d - md) * (r - mr)).collect();
    let slope = pairwise_sum(&sdr) / pairwise_sum(&sdd);
    let intercept = mr - slope * md;
    let mut model = RefractionModel::new(slope, intercept, feature_scale)?;
    let resid: Vec<T> = pairs.iter().map(|&(d, r)| r - model.forward(d)).collect();
    let ss_res = pairwise_sum(&resid.iter().map(|&e| e * e).collect::<Vec<_>>());
    let ss_tot = pairwise_sum(&rs.iter().map(|&r| (r - mr) * (r - mr)).collect::<Vec<_>>());
    model.r2 = Some(if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    });
    model.fitted_on = pairs.to_vec();
    let abs_errors: Vec<T> = resid.iter().map(|e| e.abs()).collect();
    let mean_abs_error = pairwise_sum(&abs_errors) / n;
    Ok(Calibration {
        model,
        abs_errors,
        mean_abs_error,
    })
}
