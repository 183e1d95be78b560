//! Initial radial profiles.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{RadialGrid, RadialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile parameter {name} = {value} is invalid")]
    BadParameter { name: &'static str, value: f64 },
    #[error("table needs at least two points with increasing radii")]
    BadTable,
}

/// Smooth compactly supported bump `amp * exp(1 - 1/(1 - ((R - c)/w)²))`
/// on `(c - w, c + w)`, with peak value `amp` at `R = c`.
pub fn bump(grid: Arc<RadialGrid>, center: f64, width: f64, amp: f64) -> Result<RadialProfile, ProfileError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(ProfileError::BadParameter { name: "width", value: width });
    }
    if !center.is_finite() {
        return Err(ProfileError::BadParameter { name: "center", value: center });
    }
    if !amp.is_finite() {
        return Err(ProfileError::BadParameter { name: "amplitude", value: amp });
    }
    Ok(RadialProfile::from_fn(grid, |r| {
        let x = (r - center) / width;
        let q = 1.0 - x * x;
        if q > 0.0 { amp * (1.0 - 1.0 / q).exp() } else { 0.0 }
    }))
}

/// Gaussian `amp * exp(-((R - c)/w)²)`. Not compactly supported; values
/// below `floor` are set to zero so the support is well defined.
pub fn gaussian(grid: Arc<RadialGrid>, center: f64, width: f64, amp: f64, floor: f64) -> Result<RadialProfile, ProfileError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(ProfileError::BadParameter { name: "width", value: width });
    }
    if !(center.is_finite() && amp.is_finite()) {
        return Err(ProfileError::BadParameter { name: "center", value: center });
    }
    if !(floor >= 0.0) {
        return Err(ProfileError::BadParameter { name: "floor", value: floor });
    }
    Ok(RadialProfile::from_fn(grid, |r| {
        let v = amp * (-((r - center) / width).powi(2)).exp();
        if v.abs() < floor { 0.0 } else { v }
    }))
}

/// `amp` on the closed interval `[lo, hi]`, zero elsewhere.
pub fn indicator(grid: Arc<RadialGrid>, lo: f64, hi: f64, amp: f64) -> Result<RadialProfile, ProfileError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(ProfileError::BadParameter { name: "interval", value: hi - lo });
    }
    Ok(RadialProfile::from_fn(grid, |r| if r >= lo && r <= hi { amp } else { 0.0 }))
}

/// Piecewise-linear interpolation of `(R, value)` points, zero outside.
pub fn table(grid: Arc<RadialGrid>, points: &[(f64, f64)]) -> Result<RadialProfile, ProfileError> {
    if points.len() < 2 || points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(ProfileError::BadTable);
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(ProfileError::BadTable);
    }
    Ok(RadialProfile::from_fn(grid, |r| {
        let k = points.partition_point(|p| p.0 <= r);
        if k == 0 || k == points.len() && r > points[k - 1].0 {
            return 0.0;
        }
        if k == points.len() {
            return points[k - 1].1;
        }
        let (r0, v0) = points[k - 1];
        let (r1, v1) = points[k];
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }))
}
