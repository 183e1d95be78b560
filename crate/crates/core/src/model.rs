//! The reduced leading-order system.
//!
//! The state is an amplitude profile `A(R, t)` driven by
//! `∂_t A = (1/α) ∫_R^∞ f0(s) K(A(s)) / s ds`. The vorticity is recovered as
//! `f + A/2` with `f = f0 · 2γ/(1 + γ²)`, `γ = tan θ · e^{-A}`, which is the
//! exact transport of `f0 sin 2θ` along the angular flow.

use thiserror::Error;

use crate::grid::{AngularGrid, Field2D, GridError, RadialProfile};
use crate::kernel::{KernelError, KernelKind, apply_lf_kernel, op_l, tail_profile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaRange(f64),
    #[error("initial profile is negative at node {0}")]
    NegativeProfile(usize),
    #[error("initial profile must vanish for R < 1 (nonzero at R = {0})")]
    SupportTouchesOrigin(f64),
    #[error("initial profile must vanish at the outer grid node")]
    SupportNotContained,
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn check_alpha(alpha: f64) -> Result<(), ModelError> {
    if alpha > 0.0 && alpha < 1.0 { Ok(()) } else { Err(ModelError::AlphaRange(alpha)) }
}

/// Final time `factor · α · |ln α|`.
pub fn horizon(alpha: f64, factor: f64) -> f64 {
    factor * alpha * alpha.ln().abs()
}

#[derive(Debug, Clone)]
pub struct ModelState {
    pub alpha: f64,
    pub kernel: KernelKind,
    pub t: f64,
    pub f0: RadialProfile,
    /// Accumulated amplitude `A`, nonnegative and nonincreasing in `R`.
    pub a: RadialProfile,
}

/// Validates `f0` and starts the model at `t = 0` with `A = 0`.
pub fn init_state(f0: RadialProfile, alpha: f64, kernel: KernelKind) -> Result<ModelState, ModelError> {
    check_alpha(alpha)?;
    validate_profile(&f0)?;
    let a = RadialProfile::zeros(f0.grid().clone());
    Ok(ModelState { alpha, kernel, t: 0.0, f0, a })
}

pub fn validate_profile(f0: &RadialProfile) -> Result<(), ModelError> {
    let x = f0.grid().nodes();
    for (i, (&v, &r)) in f0.values().iter().zip(x).enumerate() {
        if v < 0.0 {
            return Err(ModelError::NegativeProfile(i));
        }
        if r < 1.0 && v != 0.0 {
            return Err(ModelError::SupportTouchesOrigin(r));
        }
    }
    if *f0.values().last().unwrap() != 0.0 {
        return Err(ModelError::SupportNotContained);
    }
    Ok(())
}

impl ModelState {
    fn tendency(&self, a: &RadialProfile) -> Result<RadialProfile, ModelError> {
        let mut l = apply_lf_kernel(&self.f0, a, self.kernel)?;
        let inv = 1.0 / self.alpha;
        l.values_mut().iter_mut().for_each(|v| *v *= inv);
        Ok(l)
    }

    fn shifted(&self, c: f64, k: &RadialProfile) -> RadialProfile {
        let v = self.a.values().iter().zip(k.values()).map(|(a, k)| a + c * k).collect();
        RadialProfile::from_raw(self.a.grid().clone(), v)
    }

    /// One classical Runge–Kutta step.
    pub fn step(&self, dt: f64) -> Result<ModelState, ModelError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::BadStep(dt));
        }
        let k1 = self.tendency(&self.a)?;
        let k2 = self.tendency(&self.shifted(0.5 * dt, &k1))?;
        let k3 = self.tendency(&self.shifted(0.5 * dt, &k2))?;
        let k4 = self.tendency(&self.shifted(dt, &k3))?;
        let v = (0..self.a.len())
            .map(|i| {
                self.a.values()[i]
                    + dt / 6.0 * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
            })
            .collect();
        Ok(ModelState { a: RadialProfile::from_raw(self.a.grid().clone(), v), t: self.t + dt, ..self.clone() })
    }

    /// Advances to `t_target` in equal steps no longer than `dt_max`.
    pub fn advance_to(&self, t_target: f64, dt_max: f64) -> Result<ModelState, ModelError> {
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(ModelError::BadStep(dt_max));
        }
        let span = t_target - self.t;
        if span <= 0.0 {
            return Ok(self.clone());
        }
        let steps = (span / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let mut s = self.clone();
        for _ in 0..steps {
            s = s.step(dt)?;
        }
        s.t = t_target;
        Ok(s)
    }

    /// `L_s(Ω₂)(R) = ∫_R^∞ f0(s) K(A(s)) / s ds`, equal to `α ∂_t A`.
    pub fn eval_ls(&self) -> Result<RadialProfile, ModelError> {
        Ok(apply_lf_kernel(&self.f0, &self.a, self.kernel)?)
    }

    /// Transported part `f` at node `i` and angle `θ`.
    #[inline]
    pub fn f_at(&self, i: usize, theta: f64) -> f64 {
        transported(self.f0.values()[i], self.a.values()[i], theta)
    }

    /// `f` at an arbitrary radius, interpolating `f0` and `A` linearly.
    pub fn eval_f(&self, r: f64, theta: f64) -> Option<f64> {
        Some(transported(self.f0.interpolate(r)?, self.a.interpolate(r)?, theta))
    }

    /// The angle in `(0, π/2)` where `f` reaches `f0`, and that value.
    pub fn sup_f_theta(&self, i: usize) -> (f64, f64) {
        let theta = self.a.values()[i].exp().atan();
        (theta, self.f_at(i, theta))
    }

    /// Angular flow map at node `i` in the variable `γ = tan θ`.
    pub fn flow_map(&self, i: usize, gamma: f64) -> f64 {
        gamma * self.a.values()[i].exp()
    }

    pub fn inverse_flow_map(&self, i: usize, gamma: f64) -> f64 {
        gamma * (-self.a.values()[i]).exp()
    }

    /// `sup_θ |Ω₂| = max_R (f0 + A/2)`.
    pub fn omega2_sup(&self) -> f64 {
        self.f0.values().iter().zip(self.a.values()).fold(0.0, |m, (f, a)| m.max(f + 0.5 * a))
    }

    pub fn a_max(&self) -> f64 {
        self.a.sup_abs()
    }

    /// `Ω₂ = f + A/2` on the tensor grid.
    pub fn omega2(&self, angular: AngularGrid) -> Field2D {
        let nt = angular.len();
        let mut values = Vec::with_capacity(self.a.len() * nt);
        for i in 0..self.a.len() {
            let half_a = 0.5 * self.a.values()[i];
            values.extend((0..nt).map(|j| self.f_at(i, angular.theta(j)) + half_a));
        }
        Field2D::new(self.a.grid().clone(), angular, values).expect("model field has grid shape")
    }

    /// Principal stream function `(1/4α) L_s(R) sin 2θ`.
    pub fn psi2(&self, angular: AngularGrid) -> Result<Field2D, ModelError> {
        let mut ls = self.eval_ls()?;
        let c = 0.25 / self.alpha;
        ls.values_mut().iter_mut().for_each(|v| *v *= c);
        Ok(Field2D::separable(&ls, angular, |t| (2.0 * t).sin()))
    }
}

/// `f0 · 2γ/(1 + γ²)` with `γ = tan θ · e^{-A}`, written without `tan` so it
/// is valid in every quadrant.
#[inline]
pub fn transported(f0: f64, a: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let e = (-a).exp();
    let den = c * c + s * s * e * e;
    2.0 * f0 * s * c * e / den
}

/// Samples the model at `n_samples + 1` equally spaced times on `[0, t_final]`.
pub fn run_model(initial: &ModelState, t_final: f64, dt_max: f64, n_samples: usize) -> Result<Vec<ModelState>, ModelError> {
    let mut out = Vec::with_capacity(n_samples + 1);
    out.push(initial.clone());
    let mut s = initial.clone();
    for k in 1..=n_samples {
        s = s.advance_to(t_final * k as f64 / n_samples as f64, dt_max)?;
        out.push(s.clone());
    }
    Ok(out)
}

/// Exact values for the exponential kernel at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// `L(f0)(R)`.
    pub l0: f64,
    /// The tail `L_t(R) = L0 / (1 + t L0 / (2α))`.
    pub l_t: f64,
    /// `α A(R, t) = 2α ln(1 + t L0 / (2α))`.
    pub accumulated: f64,
}

pub fn closed_form_l(f0: &RadialProfile, alpha: f64, t: f64, r: f64) -> Result<ClosedForm, ModelError> {
    check_alpha(alpha)?;
    let l0 = op_l(f0, r)?;
    Ok(closed_form_from_l0(l0, alpha, t))
}

pub fn closed_form_from_l0(l0: f64, alpha: f64, t: f64) -> ClosedForm {
    let x = t * l0 / (2.0 * alpha);
    ClosedForm { l0, l_t: l0 / (1.0 + x), accumulated: 2.0 * alpha * x.ln_1p() }
}

/// Closed-form `α A` at every node.
pub fn closed_form_profile(f0: &RadialProfile, alpha: f64, t: f64) -> Result<RadialProfile, ModelError> {
    check_alpha(alpha)?;
    let mut l = tail_profile(f0)?;
    l.values_mut().iter_mut().for_each(|v| *v = closed_form_from_l0(*v, alpha, t).accumulated);
    Ok(l)
}

/// How the kernel bounds `c1 e^{-a} <= K <= c2 e^{-a}` enter the growth law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SandwichForm {
    /// `(2α/c2) ln(1 + c2 t L/(2α)) <= αA <= (2α/c1) ln(1 + c1 t L/(2α))`.
    Stated,
    /// The comparison-principle version, with an extra `c1/c2` or `c2/c1`
    /// factor in front of each logarithm.
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for SandwichConstants {
    fn default() -> Self {
        SandwichConstants { c1: 1.0, c2: 4.0 }
    }
}

impl SandwichConstants {
    pub fn bounds(&self, form: SandwichForm, alpha: f64, t: f64, l0: f64) -> (f64, f64) {
        let (c1, c2) = (self.c1, self.c2);
        let lo = (2.0 * alpha / c2) * (c2 * t * l0 / (2.0 * alpha)).ln_1p();
        let hi = (2.0 * alpha / c1) * (c1 * t * l0 / (2.0 * alpha)).ln_1p();
        match form {
            SandwichForm::Stated => (lo, hi),
            SandwichForm::Comparison => (lo * c1, hi * c2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub form: SandwichForm,
    pub t: f64,
    pub checked: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Largest `(αA - upper)/upper` over the checked nodes.
    pub max_upper_excess: f64,
    /// Largest `(lower - αA)/lower` over the checked nodes.
    pub max_lower_deficit: f64,
    /// Per-node lower bound, `αA`, and upper bound.
    pub lower: Vec<f64>,
    pub value: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0
    }
}

/// Compares `α A` with the logarithmic bounds at every node where
/// `L(f0) > 0`.
pub fn check_sandwich(
    state: &ModelState,
    constants: SandwichConstants,
    form: SandwichForm,
) -> Result<SandwichReport, ModelError> {
    let l0 = tail_profile(&state.f0)?;
    let n = l0.len();
    let mut report = SandwichReport {
        form,
        t: state.t,
        checked: 0,
        lower_violations: 0,
        upper_violations: 0,
        max_upper_excess: 0.0,
        max_lower_deficit: 0.0,
        lower: vec![0.0; n],
        value: state.a.values().iter().map(|a| state.alpha * a).collect(),
        upper: vec![0.0; n],
    };
    if state.t <= 0.0 {
        return Ok(report);
    }
    report.max_upper_excess = f64::NEG_INFINITY;
    report.max_lower_deficit = f64::NEG_INFINITY;
    let slack = 1e-12;
    for (i, &l) in l0.values().iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let value = report.value[i];
        let (lo, hi) = constants.bounds(form, state.alpha, state.t, l);
        report.lower[i] = lo;
        report.upper[i] = hi;
        report.checked += 1;
        let excess = (value - hi) / hi;
        let deficit = (lo - value) / lo;
        report.max_upper_excess = report.max_upper_excess.max(excess);
        report.max_lower_deficit = report.max_lower_deficit.max(deficit);
        if excess > slack {
            report.upper_violations += 1;
        }
        if deficit > slack {
            report.lower_violations += 1;
        }
    }
    Ok(report)
}
