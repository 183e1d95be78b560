//! The full transport-plus-forcing system, its linear baseline, and the
//! remainder measured against the reduced model.
//!
//! The vorticity tendency is
//!
//! ```text
//! ∂tΩ = (2α+α²) R sc ∂RΨ + (c²-s²) ∂θΨ + αR (c²-s²) ∂RθΨ + α²R² sc ∂RRΨ - sc ∂θθΨ
//!       - (-αR ∂θΨ) ∂RΩ - (2Ψ + αR ∂RΨ) ∂θΩ
//! ```
//!
//! with `s = sin θ`, `c = cos θ` and `Ψ` the elliptic solution of `Ω`. To
//! leading order this is the reduced model viewed through the quarter-turn
//! reflection `Ω(θ) ↦ -Ω(θ + π/2)`, which is how the two are compared.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::elliptic::{EllipticError, EllipticSolution, SolveOptions, radial_derivative, radial_second_derivative, solve_full};
use crate::grid::{AngularGrid, Field2D, RadialProfile, l2_norm, sup_norm};
use crate::kernel::{KernelError, KernelKind, op_ls};
use crate::model::{ModelError, ModelState, init_state};
use crate::spectral::AngularTransform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("vorticity {value:e} at R = {r} reached the outer buffer (threshold {threshold:e})")]
    SupportEscape { value: f64, r: f64, threshold: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("step budget of {0} exhausted before reaching the target time")]
    StepBudget(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaRange(f64),
    #[error("field grids do not match the solver")]
    GridMismatch,
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which groups of terms enter the tendency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub transport: bool,
    pub forcing: bool,
    /// Terms carrying an explicit factor of `α` in the transport speeds and
    /// in the forcing.
    pub alpha_weighted: bool,
}

impl Terms {
    pub const FULL: Terms = Terms { transport: true, forcing: true, alpha_weighted: true };
    pub const TRANSPORT_ONLY: Terms = Terms { transport: true, forcing: false, alpha_weighted: true };
    pub const LEADING: Terms = Terms { transport: true, forcing: true, alpha_weighted: false };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullOptions {
    pub solve: SolveOptions,
    /// Fraction of the advective limit used per step.
    pub safety: f64,
    /// Largest `|Ω|` tolerated in the outer buffer, relative to the initial sup.
    pub support_tol: f64,
    /// Width of the outer buffer as a fraction of `R_max`.
    pub support_buffer: f64,
    pub terms: Terms,
    pub max_steps: usize,
}

impl Default for FullOptions {
    fn default() -> Self {
        let mut solve = SolveOptions::default();
        solve.mode.estimate = false;
        FullOptions {
            solve,
            safety: 0.5,
            support_tol: 1e-6,
            support_buffer: 0.1,
            terms: Terms::FULL,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullState {
    pub alpha: f64,
    pub omega: Field2D,
    pub t: f64,
    /// Reference amplitude for the support monitor, `sup |Ω₀|`.
    pub scale: f64,
    /// Elliptic solution of the current `omega`, when already computed.
    pub elliptic: Option<Arc<EllipticSolution>>,
}

impl FullState {
    pub fn new(alpha: f64, omega: Field2D) -> Result<Self, EvolutionError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EvolutionError::AlphaRange(alpha));
        }
        let scale = sup_norm(&omega);
        Ok(FullState { alpha, omega, t: 0.0, scale, elliptic: None })
    }
}

/// Tendency together with the advective step limit of the state it came from.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub value: Field2D,
    /// `min(Δθ/|v_θ|, ΔR/|v_R|)` over all nodes, before the safety factor.
    pub dt_limit: f64,
    pub elliptic: Arc<EllipticSolution>,
}

/// Derivatives of the stream function used by the tendency.
#[derive(Debug, Clone)]
pub struct PsiDerivatives {
    pub psi: Field2D,
    pub psi_r: Field2D,
    pub psi_rr: Field2D,
    pub psi_t: Field2D,
    pub psi_tt: Field2D,
    pub psi_rt: Field2D,
}

#[derive(Debug, Clone)]
pub struct FullSolver {
    pub alpha: f64,
    pub options: FullOptions,
    transform: AngularTransform,
    sin2: Vec<f64>,
    cos2: Vec<f64>,
}

impl FullSolver {
    pub fn new(alpha: f64, angular: AngularGrid, options: FullOptions) -> Result<Self, EvolutionError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EvolutionError::AlphaRange(alpha));
        }
        if !(options.safety > 0.0) {
            return Err(EvolutionError::BadStep(options.safety));
        }
        let sin2 = (0..angular.len()).map(|j| (2.0 * angular.theta(j)).sin()).collect();
        let cos2 = (0..angular.len()).map(|j| (2.0 * angular.theta(j)).cos()).collect();
        Ok(FullSolver { alpha, options, transform: AngularTransform::new(angular), sin2, cos2 })
    }

    pub fn transform(&self) -> &AngularTransform {
        &self.transform
    }

    pub fn angular(&self) -> AngularGrid {
        self.transform.angular()
    }

    fn check_field(&self, f: &Field2D) -> Result<(), EvolutionError> {
        if f.angular() != self.angular() {
            return Err(EvolutionError::GridMismatch);
        }
        Ok(())
    }

    pub fn solve_elliptic(&self, omega: &Field2D) -> Result<EllipticSolution, EvolutionError> {
        self.check_field(omega)?;
        Ok(solve_full(omega, self.alpha, &self.options.solve, &self.transform)?)
    }

    pub fn psi_derivatives(&self, sol: &EllipticSolution) -> PsiDerivatives {
        let grid = sol.psi.radial();
        let psi_t = self.transform.synthesize(&sol.modes.theta_derivative(1), grid);
        let psi_tt = self.transform.synthesize(&sol.modes.theta_derivative(2), grid);
        PsiDerivatives {
            psi: sol.psi.clone(),
            psi_r: radial_derivative(&sol.psi),
            psi_rr: radial_second_derivative(&sol.psi),
            psi_rt: radial_derivative(&psi_t),
            psi_t,
            psi_tt,
        }
    }

    /// Pointwise assembly of the tendency from `Ω` and the stream-function
    /// derivatives; returns the tendency and the advective step limit.
    pub fn assemble(&self, omega: &Field2D, d: &PsiDerivatives, terms: Terms) -> (Field2D, f64) {
        let alpha = self.alpha;
        let grid = omega.radial();
        let r = grid.nodes();
        let nt = omega.n_theta();
        let nr = omega.n_r();
        let om_r = radial_derivative(omega);
        let om_t = self.transform.theta_derivative(omega, 1);
        let dtheta = self.angular().spacing();
        let aw = if terms.alpha_weighted { 1.0 } else { 0.0 };
        let mut out = vec![0.0; nr * nt];
        let limits: Vec<f64> = out
            .par_chunks_mut(nt)
            .enumerate()
            .map(|(i, row)| {
                let ri = r[i];
                let dr = if i == 0 {
                    r[1] - r[0]
                } else if i == nr - 1 {
                    r[nr - 1] - r[nr - 2]
                } else {
                    (r[i] - r[i - 1]).min(r[i + 1] - r[i])
                };
                let mut limit = f64::INFINITY;
                for (j, o) in row.iter_mut().enumerate() {
                    let k = i * nt + j;
                    let psi = d.psi.values()[k];
                    let psi_r = d.psi_r.values()[k];
                    let psi_t = d.psi_t.values()[k];
                    let v_theta = 2.0 * psi + aw * alpha * ri * psi_r;
                    let v_r = -aw * alpha * ri * psi_t;
                    let mut acc = 0.0;
                    if terms.transport {
                        acc -= v_r * om_r.values()[k] + v_theta * om_t.values()[k];
                        if v_theta != 0.0 {
                            limit = limit.min(dtheta / v_theta.abs());
                        }
                        if v_r != 0.0 {
                            limit = limit.min(dr / v_r.abs());
                        }
                    }
                    if terms.forcing {
                        let sc = 0.5 * self.sin2[j];
                        let c2 = self.cos2[j];
                        acc += c2 * psi_t - sc * d.psi_tt.values()[k];
                        if terms.alpha_weighted {
                            acc += (2.0 * alpha + alpha * alpha) * ri * sc * psi_r
                                + alpha * ri * c2 * d.psi_rt.values()[k]
                                + alpha * alpha * ri * ri * sc * d.psi_rr.values()[k];
                        }
                    }
                    *o = acc;
                }
                limit
            })
            .collect();
        let limit = limits.into_iter().fold(f64::INFINITY, f64::min);
        let field = Field2D::new(grid.clone(), omega.angular(), out).expect("tendency keeps grid shape");
        (field, limit)
    }

    pub fn rhs(&self, omega: &Field2D) -> Result<Tendency, EvolutionError> {
        let sol = Arc::new(self.solve_elliptic(omega)?);
        self.rhs_with(omega, sol)
    }

    fn rhs_with(&self, omega: &Field2D, sol: Arc<EllipticSolution>) -> Result<Tendency, EvolutionError> {
        let d = self.psi_derivatives(&sol);
        let (value, dt_limit) = self.assemble(omega, &d, self.options.terms);
        Ok(Tendency { value, dt_limit, elliptic: sol })
    }

    fn stage_one(&self, state: &FullState) -> Result<Tendency, EvolutionError> {
        match &state.elliptic {
            Some(sol) => self.rhs_with(&state.omega, sol.clone()),
            None => self.rhs(&state.omega),
        }
    }

    // SSP-RK3 given the tendency at the current state.
    fn rk3(&self, state: &FullState, k1: &Tendency, dt: f64) -> Result<FullState, EvolutionError> {
        let u0 = &state.omega;
        let u1 = u0.axpy(dt, &k1.value);
        let k2 = self.rhs(&u1)?;
        let u2 = u0.lincomb(0.75, &u1.axpy(dt, &k2.value), 0.25);
        let k3 = self.rhs(&u2)?;
        let u3 = u0.lincomb(1.0 / 3.0, &u2.axpy(dt, &k3.value), 2.0 / 3.0);
        let next = FullState { alpha: state.alpha, omega: u3, t: state.t + dt, scale: state.scale, elliptic: None };
        self.check_support(&next)?;
        Ok(next)
    }

    /// One step of size `dt`, rejected if it exceeds the advective limit.
    pub fn step(&self, state: &FullState, dt: f64) -> Result<FullState, EvolutionError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EvolutionError::BadStep(dt));
        }
        let k1 = self.stage_one(state)?;
        let limit = self.options.safety * k1.dt_limit;
        if dt > limit * (1.0 + 1e-12) {
            return Err(EvolutionError::CflViolation { dt, limit });
        }
        self.rk3(state, &k1, dt)
    }

    /// Advances to `t_target` with the largest admissible steps.
    pub fn advance_to(&self, state: &FullState, t_target: f64) -> Result<FullState, EvolutionError> {
        let mut s = state.clone();
        let mut steps = 0;
        loop {
            let remaining = t_target - s.t;
            if remaining <= 1e-14 * t_target.abs().max(1e-300) {
                break;
            }
            if steps >= self.options.max_steps {
                return Err(EvolutionError::StepBudget(self.options.max_steps));
            }
            let k1 = self.stage_one(&s)?;
            let limit = self.options.safety * k1.dt_limit;
            let dt = if remaining <= limit { remaining } else { remaining / (remaining / limit).ceil() };
            s = self.rk3(&s, &k1, dt)?;
            steps += 1;
        }
        s.t = t_target;
        Ok(s)
    }

    /// Advances to `t_target` in `n_steps` equal steps, ignoring the limit.
    pub fn advance_fixed(&self, state: &FullState, t_target: f64, n_steps: usize) -> Result<FullState, EvolutionError> {
        let dt = (t_target - state.t) / n_steps as f64;
        if !(dt > 0.0) {
            return Err(EvolutionError::BadStep(dt));
        }
        let mut s = state.clone();
        for _ in 0..n_steps {
            let k1 = self.stage_one(&s)?;
            s = self.rk3(&s, &k1, dt)?;
        }
        s.t = t_target;
        Ok(s)
    }

    pub fn check_support(&self, state: &FullState) -> Result<(), EvolutionError> {
        let grid = state.omega.radial();
        let r_edge = (1.0 - self.options.support_buffer) * grid.r_max();
        let threshold = self.options.support_tol * state.scale;
        let nt = state.omega.n_theta();
        for (i, &r) in grid.nodes().iter().enumerate().rev() {
            if r < r_edge {
                break;
            }
            let value = state.omega.values()[i * nt..(i + 1) * nt].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if !(value <= threshold) {
                return Err(EvolutionError::SupportEscape { value, r, threshold });
            }
        }
        Ok(())
    }
}

/// Tendency of the full system at `state`.
pub fn rhs_full(solver: &FullSolver, state: &FullState) -> Result<Tendency, EvolutionError> {
    solver.stage_one(state)
}

/// One SSP-RK3 step of the full system.
pub fn step_full(solver: &FullSolver, state: &FullState, dt: f64) -> Result<FullState, EvolutionError> {
    solver.step(state, dt)
}

/// Linear baseline `∂tΩ = (1/2α) L_s(Ω)`. `L_s` of the radial increment
/// vanishes, so the update is exact for any `dt`.
pub fn step_linear(state: &FullState, dt: f64) -> Result<FullState, EvolutionError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EvolutionError::BadStep(dt));
    }
    let ls = op_ls(&state.omega)?;
    let omega = state.omega.add_radial(dt / (2.0 * state.alpha), ls.values());
    Ok(FullState { omega, t: state.t + dt, elliptic: None, ..state.clone() })
}

/// `Ω₀ + (t/2α) L_s(Ω₀)`.
pub fn linear_closed_form(omega0: &Field2D, alpha: f64, t: f64) -> Result<Field2D, EvolutionError> {
    let ls = op_ls(omega0)?;
    Ok(omega0.add_radial(t / (2.0 * alpha), ls.values()))
}

/// `Ω(R, θ) ↦ -Ω(R, θ + π/2)`.
pub fn quarter_turn_reflect(field: &Field2D) -> Field2D {
    let nt = field.n_theta();
    let q = nt / 4;
    let mut out = field.clone();
    for i in 0..field.n_r() {
        let row = field.row(i);
        for j in 0..nt {
            out.values_mut()[i * nt + j] = -row[(j + q) % nt];
        }
    }
    out
}

/// The reduced-model vorticity in the orientation of the full system.
pub fn model_in_full_orientation(model: &ModelState, angular: AngularGrid) -> Field2D {
    quarter_turn_reflect(&model.omega2(angular))
}

#[derive(Debug, Clone)]
pub struct RemainderConfig {
    pub alpha: f64,
    pub f0: RadialProfile,
    pub angular: AngularGrid,
    pub t_final: f64,
    pub n_samples: usize,
    /// Step of the reduced-model integrator.
    pub model_dt: f64,
    pub kernel: KernelKind,
    pub options: FullOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderRow {
    pub t: f64,
    pub rem_sup: f64,
    pub rem_l2: f64,
    pub full_sup: f64,
    pub full_l2: f64,
    pub model_sup: f64,
    /// `L_s` of the full vorticity at the innermost support node.
    pub full_ls_inf: f64,
    /// `max_R (1/α) ∫₀ᵗ L_s(Ω_τ) dτ` for the full vorticity, by the trapezoid
    /// rule over the sample times.
    pub full_a_max: f64,
}

#[derive(Debug, Clone)]
pub struct RemainderSeries {
    pub alpha: f64,
    pub rows: Vec<RemainderRow>,
}

impl RemainderSeries {
    pub fn max_rem_sup(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rem_sup))
    }
}

/// Index of the last node before the support of `f0` (0 if it starts at
/// the first node or `f0` vanishes).
pub fn support_inf_index(f0: &RadialProfile) -> usize {
    f0.support().map_or(0, |(lo, _)| lo.saturating_sub(1))
}

/// Integrates the full system and the reduced model side by side from
/// `f0(R) sin 2θ` and records their difference at equally spaced times.
pub fn run_remainder_study(cfg: &RemainderConfig) -> Result<RemainderSeries, EvolutionError> {
    let solver = FullSolver::new(cfg.alpha, cfg.angular, cfg.options)?;
    let omega0 = Field2D::separable(&cfg.f0, cfg.angular, |t| (2.0 * t).sin());
    let mut full = FullState::new(cfg.alpha, omega0)?;
    let mut model = init_state(cfg.f0.clone(), cfg.alpha, cfg.kernel)?;
    let i_inf = support_inf_index(&cfg.f0);
    let mut rows = Vec::with_capacity(cfg.n_samples + 1);
    let mut acc = vec![0.0; cfg.f0.len()];
    let mut prev_ls: Option<(f64, Vec<f64>)> = None;
    for k in 0..=cfg.n_samples {
        let t = cfg.t_final * k as f64 / cfg.n_samples as f64;
        if k > 0 {
            full = solver.advance_to(&full, t)?;
            model = model.advance_to(t, cfg.model_dt)?;
        }
        let reference = model_in_full_orientation(&model, cfg.angular);
        let rem = full.omega.lincomb(1.0, &reference, -1.0);
        let ls = op_ls(&full.omega)?.into_values();
        if let Some((t_prev, prev)) = &prev_ls {
            let h = 0.5 * (t - t_prev) / cfg.alpha;
            for ((a, p), c) in acc.iter_mut().zip(prev).zip(&ls) {
                *a += h * (p + c);
            }
        }
        rows.push(RemainderRow {
            t,
            rem_sup: sup_norm(&rem),
            rem_l2: l2_norm(&rem),
            full_sup: sup_norm(&full.omega),
            full_l2: l2_norm(&full.omega),
            model_sup: model.omega2_sup(),
            full_ls_inf: ls[i_inf],
            full_a_max: acc.iter().fold(0.0, |m: f64, v| m.max(*v)),
        });
        prev_ls = Some((t, ls));
    }
    Ok(RemainderSeries { alpha: cfg.alpha, rows })
}
