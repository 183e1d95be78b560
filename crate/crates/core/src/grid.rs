//! Radial and angular grids, radial profiles and tensor-product fields.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::fd;
use crate::quadrature::CubicRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("radial grid needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("radial range [{r_min}, {r_max}] is invalid")]
    BadRange { r_min: f64, r_max: f64 },
    #[error("geometric spacing requires r_min > 0, got {0}")]
    GeometricOrigin(f64),
    #[error("radial nodes must be finite and strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("angular resolution {0} must be a positive multiple of 4")]
    BadAngular(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("profiles live on different radial grids")]
    GridMismatch,
    #[error("mode {n} is outside the resolvable range (n < {limit})")]
    ModeOutOfRange { n: usize, limit: usize },
    #[error("the zero mode has no sine component")]
    ParityMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingKind {
    Uniform,
    Geometric,
}

impl std::str::FromStr for SpacingKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(SpacingKind::Uniform),
            "geometric" => Ok(SpacingKind::Geometric),
            other => Err(format!("unknown spacing '{other}'")),
        }
    }
}

/// Strictly increasing radial nodes on `[r_min, r_max]`.
#[derive(Debug)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    log_nodes: Option<Vec<f64>>,
    kind: SpacingKind,
    rule: CubicRule,
}

pub const MIN_RADIAL_NODES: usize = 8;

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize, kind: SpacingKind) -> Result<Arc<Self>, GridError> {
        if n < MIN_RADIAL_NODES {
            return Err(GridError::TooFewNodes { min: MIN_RADIAL_NODES, got: n });
        }
        if !(r_min.is_finite() && r_max.is_finite() && r_min >= 0.0 && r_max > r_min) {
            return Err(GridError::BadRange { r_min, r_max });
        }
        let last = (n - 1) as f64;
        let mut nodes: Vec<f64> = match kind {
            SpacingKind::Uniform => (0..n).map(|i| r_min + (r_max - r_min) * i as f64 / last).collect(),
            SpacingKind::Geometric => {
                if r_min <= 0.0 {
                    return Err(GridError::GeometricOrigin(r_min));
                }
                let ratio = r_max / r_min;
                (0..n).map(|i| r_min * ratio.powf(i as f64 / last)).collect()
            }
        };
        nodes[0] = r_min;
        nodes[n - 1] = r_max;
        Self::build(nodes, kind)
    }

    /// Grid from explicit nodes; `kind` only records how they were made.
    pub fn from_nodes(nodes: Vec<f64>, kind: SpacingKind) -> Result<Arc<Self>, GridError> {
        if nodes.len() < MIN_RADIAL_NODES {
            return Err(GridError::TooFewNodes { min: MIN_RADIAL_NODES, got: nodes.len() });
        }
        if !(nodes[0].is_finite() && nodes[0] >= 0.0) {
            return Err(GridError::NotIncreasing(0));
        }
        for i in 1..nodes.len() {
            if !(nodes[i].is_finite() && nodes[i] > nodes[i - 1]) {
                return Err(GridError::NotIncreasing(i));
            }
        }
        Self::build(nodes, kind)
    }

    fn build(nodes: Vec<f64>, kind: SpacingKind) -> Result<Arc<Self>, GridError> {
        for i in 1..nodes.len() {
            if !(nodes[i] > nodes[i - 1]) {
                return Err(GridError::NotIncreasing(i));
            }
        }
        let log_nodes = (nodes[0] > 0.0).then(|| nodes.iter().map(|r| r.ln()).collect());
        let rule = CubicRule::new(&nodes);
        Ok(Arc::new(RadialGrid { nodes, log_nodes, kind, rule }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `ln R` at every node, absent when the grid contains the origin.
    pub fn log_nodes(&self) -> Option<&[f64]> {
        self.log_nodes.as_deref()
    }

    pub fn kind(&self) -> SpacingKind {
        self.kind
    }

    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn rule(&self) -> &CubicRule {
        &self.rule
    }

    /// Index `j` with `x_j <= r <= x_{j+1}`, or `None` outside the grid.
    pub fn locate(&self, r: f64) -> Option<usize> {
        let n = self.nodes.len();
        if !(r >= self.nodes[0] && r <= self.nodes[n - 1]) {
            return None;
        }
        let j = self.nodes.partition_point(|&x| x <= r);
        Some(j.saturating_sub(1).min(n - 2))
    }

    /// Trapezoid weights for `∫ g(R) dR` over the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let x = &self.nodes;
        let n = x.len();
        let mut w = vec![0.0; n];
        for j in 0..n - 1 {
            let h = 0.5 * (x[j + 1] - x[j]);
            w[j] += h;
            w[j + 1] += h;
        }
        w
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other) || self.nodes == other.nodes
    }

    /// `dst = d/dR src` with second-order stencils.
    pub fn derivative(&self, src: &[f64], dst: &mut [f64]) {
        fd::derivative(&self.nodes, src, dst);
    }

    pub fn second_derivative(&self, src: &[f64], dst: &mut [f64]) {
        fd::second_derivative(&self.nodes, src, dst);
    }
}

/// Uniform periodic angular grid `θ_j = 2πj/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularGrid {
    n: usize,
}

impl AngularGrid {
    /// `n` must be a positive multiple of 4 so that quarter turns map nodes
    /// onto nodes.
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n == 0 || n % 4 != 0 {
            return Err(GridError::BadAngular(n));
        }
        Ok(AngularGrid { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Modes `n < nyquist()` are represented by cosine and sine pairs.
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }
}

/// Samples of a function of `R` on a shared radial grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialProfile { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialProfile { grid, values }
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialProfile { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolation; `None` outside the grid.
    pub fn interpolate(&self, r: f64) -> Option<f64> {
        let j = self.grid.locate(r)?;
        let x = self.grid.nodes();
        let s = (r - x[j]) / (x[j + 1] - x[j]);
        Some(self.values[j] * (1.0 - s) + self.values[j + 1] * s)
    }

    /// Smallest and largest node with a nonzero value.
    pub fn support(&self) -> Option<(usize, usize)> {
        let lo = self.values.iter().position(|&v| v != 0.0)?;
        let hi = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((lo, hi))
    }

    pub fn check_same_grid(&self, other: &RadialProfile) -> Result<(), GridError> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

/// Real samples on the tensor grid, stored row-major as `[i_r * n_theta + j]`.
#[derive(Debug, Clone)]
pub struct Field2D {
    radial: Arc<RadialGrid>,
    angular: AngularGrid,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(radial: Arc<RadialGrid>, angular: AngularGrid) -> Self {
        let n = radial.len() * angular.len();
        Field2D { radial, angular, values: vec![0.0; n] }
    }

    pub fn new(radial: Arc<RadialGrid>, angular: AngularGrid, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = radial.len() * angular.len();
        if values.len() != expected {
            return Err(GridError::LengthMismatch { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Field2D { radial, angular, values })
    }

    pub fn from_fn(radial: Arc<RadialGrid>, angular: AngularGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let nt = angular.len();
        let mut values = Vec::with_capacity(radial.len() * nt);
        for &r in radial.nodes() {
            for j in 0..nt {
                values.push(f(r, angular.theta(j)));
            }
        }
        Field2D { radial, angular, values }
    }

    /// `profile(R) * g(θ)`.
    pub fn separable(profile: &RadialProfile, angular: AngularGrid, g: impl Fn(f64) -> f64) -> Self {
        let row: Vec<f64> = (0..angular.len()).map(|j| g(angular.theta(j))).collect();
        let mut values = Vec::with_capacity(profile.len() * row.len());
        for &p in profile.values() {
            values.extend(row.iter().map(|&g| p * g));
        }
        Field2D { radial: profile.grid().clone(), angular, values }
    }

    pub fn radial(&self) -> &Arc<RadialGrid> {
        &self.radial
    }

    pub fn angular(&self) -> AngularGrid {
        self.angular
    }

    pub fn n_r(&self) -> usize {
        self.radial.len()
    }

    pub fn n_theta(&self) -> usize {
        self.angular.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.angular.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nt = self.angular.len();
        &self.values[i * nt..(i + 1) * nt]
    }

    pub fn same_shape(&self, other: &Field2D) -> bool {
        self.angular == other.angular && self.radial.same_as(&other.radial)
    }

    /// `self + c * other`, elementwise.
    pub fn axpy(&self, c: f64, other: &Field2D) -> Field2D {
        debug_assert!(self.same_shape(other));
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Field2D { radial: self.radial.clone(), angular: self.angular, values }
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &Field2D, b: f64) -> Field2D {
        debug_assert!(self.same_shape(other));
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Field2D { radial: self.radial.clone(), angular: self.angular, values }
    }

    /// Field with `profile(R)` added to every angle.
    pub fn add_radial(&self, c: f64, profile: &[f64]) -> Field2D {
        let nt = self.angular.len();
        let mut out = self.clone();
        for (i, &p) in profile.iter().enumerate() {
            for v in &mut out.values[i * nt..(i + 1) * nt] {
                *v += c * p;
            }
        }
        out
    }
}

pub fn sup_norm(field: &Field2D) -> f64 {
    field.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `(∫∫ |f|² dR dθ)^{1/2}` with the trapezoid rule in `R` and the periodic
/// rectangle rule in `θ`.
pub fn l2_norm(field: &Field2D) -> f64 {
    let w = field.radial.trapezoid_weights();
    let dtheta = field.angular.spacing();
    let nt = field.angular.len();
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let row = &field.values[i * nt..(i + 1) * nt];
        acc += wi * row.iter().map(|v| v * v).sum::<f64>();
    }
    (acc * dtheta).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Cos,
    Sin,
}

/// Fourier coefficient `(1/π) ∫ f(R,θ) trig(nθ) dθ` at every radial node
/// (`1/(2π)` for the zero mode).
pub fn project_mode(field: &Field2D, n: usize, parity: Parity) -> Result<RadialProfile, GridError> {
    let limit = field.angular.nyquist();
    if n >= limit {
        return Err(GridError::ModeOutOfRange { n, limit });
    }
    if n == 0 && parity == Parity::Sin {
        return Err(GridError::ParityMismatch);
    }
    let nt = field.angular.len();
    let basis: Vec<f64> = (0..nt)
        .map(|j| {
            let a = n as f64 * field.angular.theta(j);
            match parity {
                Parity::Cos => a.cos(),
                Parity::Sin => a.sin(),
            }
        })
        .collect();
    let scale = if n == 0 { 1.0 / nt as f64 } else { 2.0 / nt as f64 };
    let values = (0..field.n_r())
        .map(|i| scale * field.row(i).iter().zip(&basis).map(|(f, b)| f * b).sum::<f64>())
        .collect();
    Ok(RadialProfile::from_raw(field.radial.clone(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_nodes_follow_ratio() {
        let g = RadialGrid::new(1.0, 4.0, 9, SpacingKind::Geometric).unwrap();
        for (k, &r) in g.nodes().iter().enumerate() {
            assert!((r - 4f64.powf(k as f64 / 8.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_small_and_bad_grids() {
        assert!(matches!(
            RadialGrid::new(0.0, 1.0, 4, SpacingKind::Uniform),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(matches!(
            RadialGrid::new(0.0, 1.0, 16, SpacingKind::Geometric),
            Err(GridError::GeometricOrigin(_))
        ));
        assert!(RadialGrid::from_nodes(vec![0.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], SpacingKind::Uniform).is_err());
        assert!(AngularGrid::new(30).is_err());
    }

    #[test]
    fn locate_brackets() {
        let g = RadialGrid::new(0.0, 1.0, 11, SpacingKind::Uniform).unwrap();
        assert_eq!(g.locate(0.0), Some(0));
        assert_eq!(g.locate(0.35), Some(3));
        assert_eq!(g.locate(1.0), Some(9));
        assert_eq!(g.locate(1.5), None);
    }

    #[test]
    fn projection_recovers_coefficients() {
        let g = RadialGrid::new(0.1, 2.0, 16, SpacingKind::Geometric).unwrap();
        let a = AngularGrid::new(32).unwrap();
        let f = Field2D::from_fn(g, a, |r, t| r * (2.0 * t).sin() + 3.0 * r * r * (5.0 * t).cos() - 0.5);
        let s2 = project_mode(&f, 2, Parity::Sin).unwrap();
        let c5 = project_mode(&f, 5, Parity::Cos).unwrap();
        let c0 = project_mode(&f, 0, Parity::Cos).unwrap();
        for (i, &r) in f.radial().nodes().iter().enumerate() {
            assert!((s2.values()[i] - r).abs() < 1e-13);
            assert!((c5.values()[i] - 3.0 * r * r).abs() < 1e-12);
            assert!((c0.values()[i] + 0.5).abs() < 1e-13);
        }
        assert_eq!(project_mode(&f, 0, Parity::Sin).unwrap_err(), GridError::ParityMismatch);
        assert!(matches!(project_mode(&f, 16, Parity::Cos), Err(GridError::ModeOutOfRange { .. })));
    }

    #[test]
    fn l2_of_indicator_converges() {
        let a = AngularGrid::new(16).unwrap();
        let target = (2.0 * PI).sqrt();
        let mut prev = f64::INFINITY;
        for n in [41, 401, 4001] {
            let g = RadialGrid::new(0.0, 4.0, n, SpacingKind::Uniform).unwrap();
            let f = Field2D::from_fn(g, a, |r, _| if (1.0..=2.0).contains(&r) { 1.0 } else { 0.0 });
            let err = (l2_norm(&f) - target).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 2e-3);
    }
}
