//! Growth curves, log-law fitting, α-scaling regression and norm monitors.

use std::fmt;

use thiserror::Error;

use crate::grid::{AngularGrid, Field2D, l2_norm};
use crate::model::{ModelError, ModelState};
use crate::spectral::AngularTransform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("curve shows no growth to fit")]
    DegenerateCurve,
    #[error("samples must be strictly increasing in time (sample {0})")]
    NotTimeOrdered(usize),
    #[error("norms must be finite and nonnegative (sample {0})")]
    BadNorm(usize),
    #[error("alpha values must form a geometric progression")]
    NotGeometric,
    #[error("values must be positive and finite for a log-log fit")]
    NonPositive,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Model,
    Full,
    Linear,
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKind::Model => "model",
            RunKind::Full => "full",
            RunKind::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSample {
    pub t: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
}

/// Time series of norms for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCurve {
    pub alpha: f64,
    pub delta: f64,
    pub kind: RunKind,
    samples: Vec<GrowthSample>,
}

impl GrowthCurve {
    pub fn new(alpha: f64, delta: f64, kind: RunKind) -> Self {
        GrowthCurve { alpha, delta, kind, samples: Vec::new() }
    }

    pub fn from_samples(alpha: f64, delta: f64, kind: RunKind, samples: Vec<GrowthSample>) -> Result<Self, DiagnosticsError> {
        let mut c = GrowthCurve::new(alpha, delta, kind);
        for s in samples {
            c.push(s)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, s: GrowthSample) -> Result<(), DiagnosticsError> {
        let k = self.samples.len();
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(s.sup_norm) || !ok(s.l2_norm) {
            return Err(DiagnosticsError::BadNorm(k));
        }
        if !s.t.is_finite() || self.samples.last().is_some_and(|p| s.t <= p.t) {
            return Err(DiagnosticsError::NotTimeOrdered(k));
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[GrowthSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Growth `sup_norm(t) - sup_norm(t_0)` per sample.
    pub fn sup_growth(&self) -> Vec<f64> {
        let s0 = self.samples.first().map_or(0.0, |s| s.sup_norm);
        self.samples.iter().map(|s| s.sup_norm - s0).collect()
    }
}

/// Model curve: `sup_norm` from the characteristic maximum and `l2_norm` of
/// `Ω₂` sampled on `angular`.
pub fn model_curve(states: &[ModelState], angular: AngularGrid, delta: f64) -> Result<GrowthCurve, DiagnosticsError> {
    let alpha = states.first().map_or(f64::NAN, |s| s.alpha);
    let mut c = GrowthCurve::new(alpha, delta, RunKind::Model);
    for s in states {
        c.push(GrowthSample { t: s.t, sup_norm: s.omega2_sup(), l2_norm: l2_norm(&s.omega2(angular)) })?;
    }
    Ok(c)
}

/// Affine least-squares fit `y ≈ intercept + slope · t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Amplitude and rate in `c_amp · ln(1 + c_rate · t / α)`.
    pub c_amp: f64,
    pub c_rate: f64,
    pub rms: f64,
    /// Range of the fitted growth, for relative residuals.
    pub range: f64,
    pub linear: LinearFit,
    /// Set when the log law fits clearly worse than a straight line.
    pub mismatch: bool,
}

pub const MIN_FIT_SAMPLES: usize = 10;

fn affine_fit(t: &[f64], y: &[f64]) -> LinearFit {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        stt += (ti - tm) * (ti - tm);
        sty += (ti - tm) * (yi - ym);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = ym - slope * tm;
    let ss: f64 = t.iter().zip(y).map(|(&ti, &yi)| (yi - intercept - slope * ti).powi(2)).sum();
    LinearFit { slope, intercept, rms: (ss / n).sqrt() }
}

/// Best amplitude and rms for a fixed rate.
fn log_fit_at(t: &[f64], y: &[f64], alpha: f64, rate: f64) -> (f64, f64) {
    let (mut sff, mut sfy) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let phi = (rate * ti / alpha).ln_1p();
        sff += phi * phi;
        sfy += phi * yi;
    }
    let amp = if sff > 0.0 { sfy / sff } else { 0.0 };
    let ss: f64 = t.iter().zip(y).map(|(&ti, &yi)| (yi - amp * (rate * ti / alpha).ln_1p()).powi(2)).sum();
    (amp, (ss / t.len() as f64).sqrt())
}

/// Affine fit of the sup-norm growth against time.
pub fn fit_linear(curve: &GrowthCurve) -> Result<LinearFit, DiagnosticsError> {
    if curve.len() < 2 {
        return Err(DiagnosticsError::InsufficientSamples { got: curve.len(), need: 2 });
    }
    let t: Vec<f64> = curve.samples().iter().map(|s| s.t).collect();
    Ok(affine_fit(&t, &curve.sup_growth()))
}

/// Fits `sup_norm(t) - sup_norm(0) ≈ c_amp ln(1 + c_rate t/α)`.
///
/// The rate is found by a log-spaced scan over `[1e-4, 1e4]` followed by
/// golden-section refinement in `ln c_rate`; the amplitude is the linear
/// least-squares optimum for each trial rate.
pub fn fit_log_growth(curve: &GrowthCurve, alpha: f64) -> Result<FitResult, DiagnosticsError> {
    if curve.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::InsufficientSamples { got: curve.len(), need: MIN_FIT_SAMPLES });
    }
    let t: Vec<f64> = curve.samples().iter().map(|s| s.t - curve.samples()[0].t).collect();
    let y = curve.sup_growth();
    let scale = curve.samples().iter().fold(0.0f64, |m, s| m.max(s.sup_norm));
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        return Err(DiagnosticsError::DegenerateCurve);
    }

    let rms_at = |x: f64| log_fit_at(&t, &y, alpha, x.exp()).1;
    let (x_min, x_max, n_scan) = ((1e-4f64).ln(), (1e4f64).ln(), 161usize);
    let dx = (x_max - x_min) / (n_scan - 1) as f64;
    let best = (0..n_scan)
        .map(|k| (k, rms_at(x_min + k as f64 * dx)))
        .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc })
        .0;
    let (mut a, mut b) = (x_min + best.saturating_sub(1) as f64 * dx, x_min + (best + 1).min(n_scan - 1) as f64 * dx);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (rms_at(c), rms_at(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rms_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rms_at(d);
        }
    }
    let rate = (0.5 * (a + b)).exp();
    let (amp, rms) = log_fit_at(&t, &y, alpha, rate);
    if !(amp > 0.0) {
        return Err(DiagnosticsError::DegenerateCurve);
    }
    let linear = affine_fit(&t, &y);
    let mismatch = rms > 10.0 * linear.rms && rms > 1e-12 * range;
    Ok(FitResult { c_amp: amp, c_rate: rate, rms, range, linear, mismatch })
}

/// Log-log regression of maximal remainder against α.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    /// Points sorted by decreasing α.
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Fitted `p` in `value ≈ prefactor · α^p`.
    pub exponent: f64,
    pub prefactor: f64,
    /// `value(α_k) / value(α_{k+1})` for consecutive points.
    pub pair_ratios: Vec<f64>,
    /// Smallest `C` with `value ≤ C α^{1/2}` at every point.
    pub envelope: f64,
    /// Exponent fitted on the first `k + 1` points; `NaN` for `k = 0`.
    pub cumulative_exponents: Vec<f64>,
}

impl ScalingReport {
    /// Values strictly decrease as α decreases.
    pub fn strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

fn loglog(alphas: &[f64], values: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = affine_fit(&x, &y);
    (fit.slope, fit.intercept.exp())
}

pub fn alpha_scaling_study(points: &[(f64, f64)]) -> Result<ScalingReport, DiagnosticsError> {
    if points.len() < 3 {
        return Err(DiagnosticsError::InsufficientPoints { got: points.len(), need: 3 });
    }
    if points.iter().any(|&(a, v)| !(a > 0.0 && a.is_finite() && v > 0.0 && v.is_finite())) {
        return Err(DiagnosticsError::NonPositive);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|p, q| q.0.total_cmp(&p.0));
    let alphas: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let values: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let q = alphas[0] / alphas[1];
    if !(q > 1.0) || alphas.windows(2).any(|w| ((w[0] / w[1]) / q - 1.0).abs() > 1e-6) {
        return Err(DiagnosticsError::NotGeometric);
    }
    let (exponent, prefactor) = loglog(&alphas, &values);
    let pair_ratios = values.windows(2).map(|w| w[0] / w[1]).collect();
    let envelope = alphas.iter().zip(&values).fold(0.0f64, |m, (a, v)| m.max(v / a.sqrt()));
    let cumulative_exponents = (0..alphas.len())
        .map(|k| if k == 0 { f64::NAN } else { loglog(&alphas[..=k], &values[..=k]).0 })
        .collect();
    Ok(ScalingReport { alphas, values, exponent, prefactor, pair_ratios, envelope, cumulative_exponents })
}

/// Stream-function and vorticity norms of one model snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub alpha: f64,
    pub psi_sup: f64,
    pub psi_theta_sup: f64,
    /// `sup |R ∂_R Ψ₂|`.
    pub psi_radial_sup: f64,
    /// `α · max` of the three stream-function norms.
    pub scaled_w1inf: f64,
    /// `(‖Ω₂‖² + ‖R ∂_R Ω₂‖² + ‖∂_θ Ω₂‖²)^{1/2}` in the `dR dθ` norm.
    pub omega_h1: f64,
    /// `d ln ‖Ω₂‖_{H1} / dt` from the previous row; `NaN` on the first row.
    pub h1_rate: f64,
}

/// Norm table for a sequence of model snapshots sharing one grid.
pub fn norm_monitors(snapshots: &[ModelState], angular: AngularGrid) -> Result<Vec<MonitorRow>, DiagnosticsError> {
    let transform = AngularTransform::new(angular);
    let mut rows: Vec<MonitorRow> = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let grid = s.f0.grid().clone();
        let r = grid.nodes();
        let ls = s.eval_ls()?;
        let c = 0.25 / s.alpha;
        let mut dls = vec![0.0; r.len()];
        grid.derivative(ls.values(), &mut dls);
        let psi_sup = c * ls.sup_abs();
        let psi_theta_sup = 2.0 * psi_sup;
        let psi_radial_sup = c * r.iter().zip(&dls).fold(0.0f64, |m, (r, d)| m.max((r * d).abs()));

        let omega = s.omega2(angular);
        let dtheta = transform.theta_derivative(&omega, 1);
        let nt = angular.len();
        let mut radial = vec![0.0; r.len() * nt];
        let mut col = vec![0.0; r.len()];
        let mut dcol = vec![0.0; r.len()];
        for j in 0..nt {
            for i in 0..r.len() {
                col[i] = omega.get(i, j);
            }
            grid.derivative(&col, &mut dcol);
            for i in 0..r.len() {
                radial[i * nt + j] = r[i] * dcol[i];
            }
        }
        let radial = Field2D::new(grid.clone(), angular, radial).expect("shape matches");
        let omega_h1 = (l2_norm(&omega).powi(2) + l2_norm(&radial).powi(2) + l2_norm(&dtheta).powi(2)).sqrt();
        let h1_rate = match rows.last() {
            Some(p) if s.t > p.t && p.omega_h1 > 0.0 && omega_h1 > 0.0 => (omega_h1 / p.omega_h1).ln() / (s.t - p.t),
            _ => f64::NAN,
        };
        rows.push(MonitorRow {
            t: s.t,
            alpha: s.alpha,
            psi_sup,
            psi_theta_sup,
            psi_radial_sup,
            scaled_w1inf: s.alpha * psi_sup.max(psi_theta_sup).max(psi_radial_sup),
            omega_h1,
            h1_rate,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(alpha: f64, f: impl Fn(f64) -> f64, n: usize, t_end: f64) -> GrowthCurve {
        let samples = (0..n)
            .map(|k| {
                let t = t_end * k as f64 / (n - 1) as f64;
                GrowthSample { t, sup_norm: 1.0 + f(t), l2_norm: 1.0 }
            })
            .collect();
        GrowthCurve::from_samples(alpha, 1.0, RunKind::Model, samples).unwrap()
    }

    #[test]
    fn recovers_log_constants() {
        let alpha = 0.1;
        let c = synth(alpha, |t| 0.7 * (3.0 * t / alpha).ln_1p(), 50, 0.5);
        let fit = fit_log_growth(&c, alpha).unwrap();
        assert!((fit.c_amp - 0.7).abs() < 1e-6 && (fit.c_rate - 3.0).abs() < 1e-5, "{fit:?}");
        assert!(!fit.mismatch);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let c = synth(0.1, |_| 0.0, 20, 1.0);
        assert_eq!(fit_log_growth(&c, 0.1), Err(DiagnosticsError::DegenerateCurve));
    }

    #[test]
    fn rejects_unordered_samples() {
        let mut c = GrowthCurve::new(0.1, 1.0, RunKind::Full);
        c.push(GrowthSample { t: 1.0, sup_norm: 1.0, l2_norm: 1.0 }).unwrap();
        assert!(c.push(GrowthSample { t: 1.0, sup_norm: 1.0, l2_norm: 1.0 }).is_err());
        assert!(c.push(GrowthSample { t: 2.0, sup_norm: -1.0, l2_norm: 1.0 }).is_err());
    }

    #[test]
    fn scaling_identity() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&a: &f64| (a, 3.0 * a.sqrt())).collect();
        let r = alpha_scaling_study(&pts).unwrap();
        assert!((r.exponent - 0.5).abs() < 1e-12);
        assert!((r.envelope - 3.0).abs() < 1e-12);
    }
}
