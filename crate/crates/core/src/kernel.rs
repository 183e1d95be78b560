//! The weighted radial kernel and the tail operators built on it.
//!
//! `K(a) = (16/π) ∫₀^∞ e^{-a} γ² / ((1 + γ² e^{-2a}) (1 + γ²)²) dγ` decays
//! like `e^{-a}` and satisfies `e^{-a} <= K(a) <= 4 e^{-a}`. The quadrature
//! evaluates it as a nonnegative correction to whichever bound is closer, so
//! the sandwich survives rounding.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::grid::{Field2D, GridError, Parity, RadialProfile, project_mode};
use crate::quadrature::integrate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel argument must be finite and nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("radius {r} lies outside the grid [{r_min}, {r_max}]")]
    UnsupportedR { r: f64, r_min: f64, r_max: f64 },
    #[error("profile is nonzero at the origin node, where f/s is singular")]
    OriginSingularity,
    #[error("quadrature did not reach tolerance {tol:e} (estimate {error:e})")]
    Quadrature { tol: f64, error: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Absolute tolerance on `K(a) e^{a}`.
pub const KERNEL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 400;
const SPLIT_A: f64 = 1.0;
const WEIGHT: f64 = 16.0 / PI;

/// A kernel value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub a: f64,
    pub value: f64,
    pub error_estimate: f64,
}

// Integral over (0, ∞) of an integrand given on [0, 1] in γ and on [0, 1] in
// v = 1/γ. The outer integrand has a peak of width `b` at the origin, so its
// range is cut at b, 4b, 16b, ... before adaptive refinement.
fn split_integral(b: f64, abs_tol: f64, inner: impl Fn(f64) -> f64, outer: impl Fn(f64) -> f64) -> Result<(f64, f64), KernelError> {
    let mut cuts = vec![0.0];
    let mut c = b;
    while c < 0.5 {
        cuts.push(c);
        c *= 4.0;
    }
    cuts.push(1.0);
    let tol = abs_tol / WEIGHT / cuts.len() as f64;
    let first = integrate(&inner, 0.0, 1.0, tol, MAX_INTERVALS);
    let (mut value, mut error) = (first.value, first.error);
    for w in cuts.windows(2) {
        let part = integrate(&outer, w[0], w[1], tol, MAX_INTERVALS);
        value += part.value;
        error += part.error;
    }
    let error = WEIGHT * error;
    if error > abs_tol {
        return Err(KernelError::Quadrature { tol: abs_tol, error });
    }
    Ok((WEIGHT * value, error))
}

/// `K(a) e^{a}` and its error estimate.
fn reduced_kernel(a: f64, tol: f64) -> Result<(f64, f64), KernelError> {
    let b = (-a).exp();
    let b2 = b * b;
    if a <= SPLIT_A {
        // K e^a = 1 + (16/π) ∫ γ⁴ (1 - b²) / ((1 + b²γ²)(1 + γ²)³)
        let c = 1.0 - b2;
        let (e, err) = split_integral(
            b,
            tol,
            |g| {
                let g2 = g * g;
                let s = 1.0 + g2;
                g2 * g2 * c / ((1.0 + b2 * g2) * s * s * s)
            },
            |v| {
                let v2 = v * v;
                let s = 1.0 + v2;
                c * v2 / ((v2 + b2) * s * s * s)
            },
        )?;
        Ok((1.0 + e, err))
    } else {
        // K e^a = 4 - (16/π) ∫ b² γ⁴ / ((1 + b²γ²)(1 + γ²)²)
        let (d, err) = split_integral(
            b,
            tol,
            |g| {
                let g2 = g * g;
                let s = 1.0 + g2;
                b2 * g2 * g2 / ((1.0 + b2 * g2) * s * s)
            },
            |v| {
                let v2 = v * v;
                let s = 1.0 + v2;
                b2 / ((v2 + b2) * s * s)
            },
        )?;
        Ok((4.0 - d, err))
    }
}

/// `d/da [K(a) e^{a}]`.
fn reduced_kernel_slope(a: f64) -> Result<f64, KernelError> {
    let b = (-a).exp();
    let b2 = b * b;
    let (v, _) = split_integral(
        b,
        KERNEL_TOL,
        |g| {
            let g2 = g * g;
            let s = 1.0 + g2;
            let q = 1.0 + b2 * g2;
            2.0 * b2 * g2 * g2 / (s * s * q * q)
        },
        |v| {
            let v2 = v * v;
            let s = 1.0 + v2;
            let q = v2 + b2;
            2.0 * b2 * v2 / (s * s * q * q)
        },
    )?;
    Ok(v)
}

/// Evaluates the kernel by adaptive quadrature.
pub fn gamma_kernel(a: f64) -> Result<KernelEval, KernelError> {
    gamma_kernel_with_tol(a, KERNEL_TOL)
}

/// [`gamma_kernel`] with an absolute tolerance `tol` on `K(a) e^{a}`.
pub fn gamma_kernel_with_tol(a: f64, tol: f64) -> Result<KernelEval, KernelError> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(KernelError::NegativeArgument(a));
    }
    let (red, err) = reduced_kernel(a, tol)?;
    let scale = (-a).exp();
    Ok(KernelEval { a, value: scale * red, error_estimate: scale * err })
}

/// `K'(a)` by quadrature.
pub fn gamma_kernel_derivative(a: f64) -> Result<f64, KernelError> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(KernelError::NegativeArgument(a));
    }
    let (red, _) = reduced_kernel(a, KERNEL_TOL)?;
    let slope = reduced_kernel_slope(a)?;
    Ok((-a).exp() * (slope - red))
}

/// Which kernel drives the tail operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    #[default]
    Full,
    /// `K(a) = e^{-a}`, for which the model has a closed-form solution.
    Exponential,
}

/// Cubic Hermite table of `ln K` with exact slopes.
#[derive(Debug)]
pub struct KernelTable {
    step: f64,
    log_k: Vec<f64>,
    slope: Vec<f64>,
}

pub const TABLE_STEP: f64 = 0.02;
pub const TABLE_MAX: f64 = 40.0;

impl KernelTable {
    pub fn build(step: f64, a_max: f64) -> Result<Self, KernelError> {
        let n = (a_max / step).round() as usize + 1;
        let mut log_k = Vec::with_capacity(n);
        let mut slope = Vec::with_capacity(n);
        for k in 0..n {
            let a = k as f64 * step;
            let (red, _) = reduced_kernel(a, KERNEL_TOL)?;
            let dred = reduced_kernel_slope(a)?;
            log_k.push(red.ln() - a);
            slope.push(dred / red - 1.0);
        }
        Ok(KernelTable { step, log_k, slope })
    }

    /// The shared table on `[0, 40]` with step `0.02`.
    pub fn global() -> &'static KernelTable {
        static TABLE: OnceLock<KernelTable> = OnceLock::new();
        TABLE.get_or_init(|| KernelTable::build(TABLE_STEP, TABLE_MAX).expect("kernel table quadrature converges"))
    }

    pub fn a_max(&self) -> f64 {
        (self.log_k.len() - 1) as f64 * self.step
    }

    /// `K(a)` for `a >= 0`; linear in `ln K` beyond the table.
    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        debug_assert!(a >= 0.0);
        let last = self.log_k.len() - 1;
        let u = a / self.step;
        if u >= last as f64 {
            let da = a - self.a_max();
            return (self.log_k[last] + self.slope[last] * da).exp();
        }
        let k = u as usize;
        let s = u - k as f64;
        let h = self.step;
        let (y0, y1) = (self.log_k[k], self.log_k[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        y.exp()
    }
}

impl KernelKind {
    #[inline]
    pub fn eval(self, a: f64) -> f64 {
        match self {
            KernelKind::Full => KernelTable::global().eval(a),
            KernelKind::Exponential => (-a).exp(),
        }
    }
}

fn over_s(f: &RadialProfile) -> Result<Vec<f64>, KernelError> {
    let x = f.grid().nodes();
    let mut h = f
        .values()
        .iter()
        .zip(x)
        .map(|(&v, &s)| {
            if s > 0.0 {
                Ok(v / s)
            } else if v == 0.0 {
                Ok(0.0)
            } else {
                Err(KernelError::OriginSingularity)
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if x[0] == 0.0 {
        // the limit f'(0), by quadratic extrapolation of f/s
        let (x1, x2, x3) = (x[1], x[2], x[3]);
        let l1 = x2 * x3 / ((x1 - x2) * (x1 - x3));
        let l2 = x1 * x3 / ((x2 - x1) * (x2 - x3));
        let l3 = x1 * x2 / ((x3 - x1) * (x3 - x2));
        h[0] = l1 * h[1] + l2 * h[2] + l3 * h[3];
    }
    Ok(h)
}

/// `∫_R^{R_max} f(s)/s ds` at every node.
pub fn tail_profile(f: &RadialProfile) -> Result<RadialProfile, KernelError> {
    let h = over_s(f)?;
    let mut out = vec![0.0; h.len()];
    f.grid().rule().tail(&h, &mut out);
    Ok(RadialProfile::from_raw(f.grid().clone(), out))
}

/// `∫_R^∞ f(s)/s ds` at an arbitrary radius inside the grid; `f` is taken
/// to vanish beyond the last node.
pub fn op_l(f: &RadialProfile, r: f64) -> Result<f64, KernelError> {
    let grid = f.grid();
    let j = grid.locate(r).ok_or(KernelError::UnsupportedR { r, r_min: grid.r_min(), r_max: grid.r_max() })?;
    let h = over_s(f)?;
    let rule = grid.rule();
    Ok(rule.partial(grid.nodes(), j, r, &h) + rule.sum_from(j + 1, &h))
}

/// Tail operator applied to the `sin 2θ` coefficient of `field`.
pub fn op_ls(field: &Field2D) -> Result<RadialProfile, KernelError> {
    tail_profile(&project_mode(field, 2, Parity::Sin)?)
}

/// Tail operator applied to the `cos 2θ` coefficient of `field`.
pub fn op_lc(field: &Field2D) -> Result<RadialProfile, KernelError> {
    tail_profile(&project_mode(field, 2, Parity::Cos)?)
}

/// `∫_R^∞ f0(s) K(A(s)) / s ds` at every node.
pub fn apply_lf_kernel(f0: &RadialProfile, a: &RadialProfile, kind: KernelKind) -> Result<RadialProfile, KernelError> {
    f0.check_same_grid(a)?;
    let mut weighted = Vec::with_capacity(f0.len());
    for (&f, &av) in f0.values().iter().zip(a.values()) {
        if !(av >= 0.0) {
            return Err(KernelError::NegativeArgument(av));
        }
        weighted.push(if f == 0.0 { 0.0 } else { f * kind.eval(av) });
    }
    tail_profile(&RadialProfile::from_raw(f0.grid().clone(), weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{RadialGrid, SpacingKind};

    fn sech2_half(a: f64) -> f64 {
        let c = (0.5 * a).cosh();
        1.0 / (c * c)
    }

    #[test]
    fn matches_closed_form() {
        for a in [0.0, 0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 25.0] {
            let k = gamma_kernel(a).unwrap();
            let exact = sech2_half(a);
            assert!((k.value - exact).abs() <= 1e-9 * exact, "a={a}: {} vs {exact}", k.value);
        }
        assert!((gamma_kernel(0.0).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_closed_form() {
        for a in [0.0, 0.3, 1.0, 2.0, 8.0] {
            let exact = -sech2_half(a) * (0.5 * a).tanh();
            let d = gamma_kernel_derivative(a).unwrap();
            assert!((d - exact).abs() < 1e-9, "a={a}: {d} vs {exact}");
        }
    }

    #[test]
    fn table_is_accurate() {
        let t = KernelTable::global();
        for k in 0..4000 {
            let a = 0.013 * k as f64;
            let exact = sech2_half(a);
            assert!((t.eval(a) - exact).abs() <= 1e-9 * exact, "a={a}");
        }
    }

    #[test]
    fn rejects_negative_argument() {
        assert!(matches!(gamma_kernel(-0.1), Err(KernelError::NegativeArgument(_))));
    }

    #[test]
    fn tail_of_indicator_is_log() {
        let g = RadialGrid::new(0.25, 4.0, 400, SpacingKind::Geometric).unwrap();
        let f = RadialProfile::from_fn(g.clone(), |_| 1.0);
        let l = op_l(&f, 0.5).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-8);
        assert!(matches!(op_l(&f, 5.0), Err(KernelError::UnsupportedR { .. })));
    }
}
