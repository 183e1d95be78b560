//! Stream function from vorticity, one angular mode at a time.
//!
//! In `x = ln R` the operator `4Ψ + ∂θθΨ + α²R²∂RRΨ + (4α+α²)R∂RΨ` acting on
//! the `n`-th mode has constant coefficients, `α²Ψ'' + 4αΨ' + (4 - n²)Ψ`,
//! with homogeneous solutions `R^{(n-2)/α}` and `R^{(-n-2)/α}`. Modes `n >= 3`
//! are two-point problems with zero ends. For `n <= 1` both homogeneous
//! solutions are singular at the origin and decay outward, so the bounded
//! solution is marched outward from its local value near the origin. Mode 2
//! is first order in `Ψ'` and closed on the right by the exact decay rate.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::fd;
use crate::grid::{AngularGrid, Field2D, GridError, Parity, RadialGrid, RadialProfile};
use crate::kernel::{KernelError, tail_profile};
use crate::spectral::{AngularTransform, ModeCoefficients};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaRange(f64),
    #[error("the logarithmic mode solver needs a grid with R_min > 0")]
    OriginNode,
    #[error("mode {n}: estimated discretization error {estimate:e} exceeds {tolerance:e}")]
    GridTooCoarse { n: usize, estimate: f64, tolerance: f64 },
    #[error("mode {n}: solution has not decayed at the grid end (relative size {ratio:e})")]
    UnresolvedBoundary { n: usize, ratio: f64 },
    #[error("requested {requested} modes but the angular grid resolves fewer than {limit}")]
    TooManyModes { requested: usize, limit: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn check_alpha(alpha: f64) -> Result<(), EllipticError> {
    if alpha > 0.0 && alpha < 1.0 { Ok(()) } else { Err(EllipticError::AlphaRange(alpha)) }
}

/// Tolerances for a single mode solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    /// Richardson error estimate allowed relative to `max |Ψ_n|`.
    pub rel_tol: f64,
    /// Absolute floor added to every relative test.
    pub abs_floor: f64,
    /// Largest admissible `|Ψ_n|` next to a truncated end, relative to `max |Ψ_n|`.
    pub boundary_tol: f64,
    /// Compute the Richardson estimate (one extra solve on every other node).
    pub estimate: bool,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions { rel_tol: 1e-2, abs_floor: 1e-13, boundary_tol: 1e-4, estimate: true }
    }
}

#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub psi: RadialProfile,
    /// Sup of the Richardson estimate over the coarse nodes; `None` when skipped.
    pub error_estimate: Option<f64>,
}

// Row coefficients (lower, diag, upper) of the discrete mode operator in x.
#[inline]
fn row(x: &[f64], i: usize, n: usize, alpha: f64) -> [f64; 3] {
    let h1 = x[i] - x[i - 1];
    let h2 = x[i + 1] - x[i];
    let d1 = fd::first_interior(h1, h2);
    let d2 = fd::second_interior(h1, h2);
    let k = 4.0 - (n * n) as f64;
    let a2 = alpha * alpha;
    [
        a2 * d2[0] + 4.0 * alpha * d1[0],
        a2 * d2[1] + 4.0 * alpha * d1[1] + k,
        a2 * d2[2] + 4.0 * alpha * d1[2],
    ]
}

fn solve_on_nodes(x: &[f64], omega: &[f64], n: usize, alpha: f64) -> Vec<f64> {
    let m = x.len();
    let mut psi = vec![0.0; m];
    if omega.iter().all(|&v| v == 0.0) {
        return psi;
    }
    match n {
        0 | 1 => {
            let k = 4.0 - (n * n) as f64;
            psi[0] = omega[0] / k;
            psi[1] = psi[0];
            for i in 1..m - 1 {
                let [a, b, c] = row(x, i, n, alpha);
                psi[i + 1] = (omega[i] - a * psi[i - 1] - b * psi[i]) / c;
            }
        }
        2 => {
            // rows read c_i D_i - a_i D_{i-1} = Ω_i with D_i = Ψ_{i+1} - Ψ_i
            let mut d = vec![0.0; m - 1];
            d[0] = omega[0] / (4.0 * alpha) * (x[1] - x[0]);
            for i in 1..m - 1 {
                let [a, _, c] = row(x, i, n, alpha);
                d[i] = (omega[i] + a * d[i - 1]) / c;
            }
            // beyond the data Ψ ∝ e^{-4x/α}
            let z = 4.0 / alpha * (x[m - 1] - x[m - 2]);
            psi[m - 1] = -d[m - 2] / z.exp_m1();
            for i in (0..m - 1).rev() {
                psi[i] = psi[i + 1] - d[i];
            }
        }
        _ => {
            // Thomas algorithm on the interior with zero ends
            let len = m - 2;
            let mut cp = vec![0.0; len];
            let mut dp = vec![0.0; len];
            for r in 0..len {
                let [a, b, c] = row(x, r + 1, n, alpha);
                let (a, rhs) = if r == 0 { (0.0, omega[1]) } else { (a, omega[r + 1]) };
                let denom = b - a * if r == 0 { 0.0 } else { cp[r - 1] };
                cp[r] = c / denom;
                dp[r] = (rhs - a * if r == 0 { 0.0 } else { dp[r - 1] }) / denom;
            }
            psi[len] = dp[len - 1];
            for r in (0..len - 1).rev() {
                psi[r + 1] = dp[r] - cp[r] * psi[r + 2];
            }
        }
    }
    psi
}

fn coarse_indices(m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).step_by(2).collect();
    if *idx.last().unwrap() != m - 1 {
        idx.push(m - 1);
    }
    idx
}

fn richardson(x: &[f64], omega: &[f64], psi: &[f64], n: usize, alpha: f64) -> f64 {
    let idx = coarse_indices(x.len());
    let xc: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let oc: Vec<f64> = idx.iter().map(|&i| omega[i]).collect();
    let pc = solve_on_nodes(&xc, &oc, n, alpha);
    idx.iter().zip(&pc).fold(0.0, |m: f64, (&i, &p)| m.max((psi[i] - p).abs() / 3.0))
}

/// Solves `α²Ψ'' + 4αΨ' + (4 - n²)Ψ = Ω_n` in `x = ln R`.
pub fn solve_mode(n: usize, omega_n: &RadialProfile, alpha: f64, opts: &ModeOptions) -> Result<ModeSolution, EllipticError> {
    check_alpha(alpha)?;
    let grid = omega_n.grid();
    let x = grid.log_nodes().ok_or(EllipticError::OriginNode)?;
    let om = omega_n.values();
    let psi = solve_on_nodes(x, om, n, alpha);
    let scale = psi.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let error_estimate = if opts.estimate && scale > 0.0 {
        let est = richardson(x, om, &psi, n, alpha);
        let tolerance = opts.rel_tol * scale + opts.abs_floor;
        if est > tolerance {
            return Err(EllipticError::GridTooCoarse { n, estimate: est, tolerance });
        }
        Some(est)
    } else if opts.estimate {
        Some(0.0)
    } else {
        None
    };
    // only the two-point problems truncate the domain
    if scale > 0.0 && n >= 3 {
        let edge = psi[1].abs().max(psi[psi.len() - 2].abs());
        if edge > opts.boundary_tol * scale + opts.abs_floor {
            return Err(EllipticError::UnresolvedBoundary { n, ratio: edge / scale });
        }
    }
    Ok(ModeSolution { psi: RadialProfile::from_raw(grid.clone(), psi), error_estimate })
}

// Product-integration weights for ∫₀¹ (g0 u + g1 (1-u)) e^{-z u} du.
#[inline]
fn exp_weights(z: f64) -> (f64, f64) {
    let w0 = if z < 1e-2 {
        0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0 + z * z * z * z / 144.0
    } else {
        (-(-z).exp_m1() - z * (-z).exp()) / (z * z)
    };
    let total = if z < 1e-8 { 1.0 - 0.5 * z } else { -(-z).exp_m1() / z };
    (w0, total - w0)
}

/// `∫₀^R f(s) (s/R)^k ds/s` at every node, with `f` linear in `ln s` between
/// nodes. Every weight is positive, so the result is bounded by `sup|f|/k`.
pub fn weighted_head(f: &RadialProfile, k: f64) -> Vec<f64> {
    let x = f.grid().nodes();
    let v = f.values();
    let m = x.len();
    let mut out = vec![0.0; m];
    let start = if x[0] == 0.0 {
        // f linear in s on [0, x_1]
        out[1] = v[0] / k + (v[1] - v[0]) / (k + 1.0);
        1
    } else {
        // f taken constant below the first node
        out[0] = v[0] / k;
        0
    };
    for i in start..m - 1 {
        let dy = (x[i + 1] / x[i]).ln();
        let z = k * dy;
        let (w0, w1) = exp_weights(z);
        out[i + 1] = (-z).exp() * out[i] + dy * (v[i] * w0 + v[i + 1] * w1);
    }
    out
}

/// The closed-form mode-2 solution `-(1/4α)[L(f)(R) + ∫₀^R f(s)(s/R)^{4/α} ds/s]`
/// at every node.
pub fn exact_mode2_profile(f: &RadialProfile, alpha: f64) -> Result<RadialProfile, EllipticError> {
    let (p, r) = principal_remainder_split(f, alpha)?;
    let v = p.values().iter().zip(r.values()).map(|(a, b)| a + b).collect();
    Ok(RadialProfile::from_raw(f.grid().clone(), v))
}

/// [`exact_mode2_profile`] with a Richardson estimate against the same
/// formula evaluated on every other node.
pub fn exact_mode2_solution(f: &RadialProfile, alpha: f64) -> Result<ModeSolution, EllipticError> {
    let psi = exact_mode2_profile(f, alpha)?;
    let grid = f.grid();
    let idx = coarse_indices(grid.len());
    let estimate = if idx.len() >= crate::grid::MIN_RADIAL_NODES {
        let coarse = RadialGrid::from_nodes(idx.iter().map(|&i| grid.nodes()[i]).collect(), grid.kind())?;
        let fc = RadialProfile::from_raw(coarse, idx.iter().map(|&i| f.values()[i]).collect());
        let pc = exact_mode2_profile(&fc, alpha)?;
        Some(idx.iter().zip(pc.values()).fold(0.0, |m: f64, (&i, &p)| m.max((psi.values()[i] - p).abs() / 3.0)))
    } else {
        None
    };
    Ok(ModeSolution { psi, error_estimate: estimate })
}

/// The closed-form mode-2 solution at an arbitrary radius inside the grid.
pub fn exact_mode2(f: &RadialProfile, alpha: f64, r: f64) -> Result<f64, EllipticError> {
    check_alpha(alpha)?;
    let grid = f.grid();
    let j = grid.locate(r).ok_or(KernelError::UnsupportedR { r, r_min: grid.r_min(), r_max: grid.r_max() })?;
    let l = crate::kernel::op_l(f, r)?;
    let k = 4.0 / alpha;
    let head = weighted_head(f, k);
    let x = grid.nodes();
    let v = f.values();
    let fr = f.interpolate(r).unwrap_or(0.0);
    let tail_part = if x[j] == 0.0 {
        // linear in s on the first interval
        let slope = (v[1] - v[0]) / x[1];
        v[0] / k + slope * r / (k + 1.0)
    } else if r == x[j] {
        head[j]
    } else {
        let dy = (r / x[j]).ln();
        let z = k * dy;
        let (w0, w1) = exp_weights(z);
        (-z).exp() * head[j] + dy * (v[j] * w0 + fr * w1)
    };
    Ok(-(l + tail_part) / (4.0 * alpha))
}

/// `(principal, remainder)` with `principal = -L(f)/(4α)`.
pub fn principal_remainder_split(f: &RadialProfile, alpha: f64) -> Result<(RadialProfile, RadialProfile), EllipticError> {
    check_alpha(alpha)?;
    let c = -0.25 / alpha;
    let mut principal = tail_profile(f)?;
    principal.values_mut().iter_mut().for_each(|v| *v *= c);
    let head = weighted_head(f, 4.0 / alpha);
    let remainder = head.into_iter().map(|v| c * v).collect();
    Ok((principal, RadialProfile::from_raw(f.grid().clone(), remainder)))
}

/// How the `n = 2` modes are solved inside [`solve_full`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode2Path {
    #[default]
    Exact,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Highest retained mode is `n_modes - 1`; defaults to `n_theta / 3`.
    pub n_modes: Option<usize>,
    pub mode2: Mode2Path,
    pub mode: ModeOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { n_modes: None, mode2: Mode2Path::Exact, mode: ModeOptions::default() }
    }
}

impl SolveOptions {
    pub fn resolved_modes(&self, angular: AngularGrid) -> Result<usize, EllipticError> {
        let limit = angular.nyquist();
        let n = self.n_modes.unwrap_or(angular.len() / 3);
        if n > limit {
            return Err(EllipticError::TooManyModes { requested: n, limit });
        }
        Ok(n)
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub alpha: f64,
    pub n_modes: usize,
    /// Stream-function coefficients indexed `[n][i_r]`.
    pub modes: ModeCoefficients,
    pub psi: Field2D,
    /// Discrete residual over interior nodes relative to `‖Ω‖₂` (retained modes).
    pub residual_norm: f64,
    /// Largest per-mode error estimate, when estimates were computed.
    pub error_estimate: Option<f64>,
    /// `L²` size of the discarded vorticity modes.
    pub truncated_norm: f64,
    /// `L²` size of the `n = 0, 1` vorticity modes.
    pub low_mode_norm: f64,
}

impl EllipticSolution {
    pub fn mode(&self, n: usize, parity: Parity) -> RadialProfile {
        let v = match parity {
            Parity::Cos => self.modes.cos[n].clone(),
            Parity::Sin => self.modes.sin[n].clone(),
        };
        RadialProfile::from_raw(self.psi.radial().clone(), v)
    }
}

// ∫∫ |f|² dR dθ from mode coefficients, by Parseval in θ and trapezoid in R.
fn modal_l2(coeffs: &[(usize, &[f64])], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &(n, c) in coeffs {
        let weight = if n == 0 { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
        acc += weight * c.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>();
    }
    acc.sqrt()
}

/// Solves the full elliptic problem mode by mode.
pub fn solve_full(
    omega: &Field2D,
    alpha: f64,
    opts: &SolveOptions,
    transform: &AngularTransform,
) -> Result<EllipticSolution, EllipticError> {
    check_alpha(alpha)?;
    let grid = omega.radial().clone();
    let x = grid.log_nodes().ok_or(EllipticError::OriginNode)?.to_vec();
    let n_modes = opts.resolved_modes(omega.angular())?;
    let om = transform.analyze(omega);
    let nr = grid.len();
    let global = om.cos.iter().chain(&om.sin).flatten().fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut mode_opts = opts.mode;
    mode_opts.abs_floor = mode_opts.abs_floor.max(1e-12 * global / 4.0);

    let jobs: Vec<(usize, Parity)> = (0..n_modes)
        .flat_map(|n| {
            let mut v = vec![(n, Parity::Cos)];
            if n > 0 {
                v.push((n, Parity::Sin));
            }
            v
        })
        .collect();
    let solved: Vec<Result<(Vec<f64>, Option<f64>), EllipticError>> = jobs
        .par_iter()
        .map(|&(n, parity)| {
            let src = match parity {
                Parity::Cos => &om.cos[n],
                Parity::Sin => &om.sin[n],
            };
            if src.iter().all(|&v| v == 0.0) {
                return Ok((vec![0.0; nr], Some(0.0)));
            }
            let prof = RadialProfile::from_raw(grid.clone(), src.clone());
            if n == 2 && opts.mode2 == Mode2Path::Exact {
                if mode_opts.estimate {
                    let s = exact_mode2_solution(&prof, alpha)?;
                    return Ok((s.psi.into_values(), s.error_estimate));
                }
                return Ok((exact_mode2_profile(&prof, alpha)?.into_values(), None));
            }
            let s = solve_mode(n, &prof, alpha, &mode_opts)?;
            Ok((s.psi.into_values(), s.error_estimate))
        })
        .collect();

    let mut modes = ModeCoefficients::zeros(n_modes, nr);
    let mut error_estimate = if mode_opts.estimate { Some(0.0f64) } else { None };
    for (&(n, parity), res) in jobs.iter().zip(solved) {
        let (v, est) = res?;
        if let (Some(e), Some(acc)) = (est, error_estimate.as_mut()) {
            *acc = acc.max(e);
        }
        match parity {
            Parity::Cos => modes.cos[n] = v,
            Parity::Sin => modes.sin[n] = v,
        }
    }
    let psi = transform.synthesize(&modes, &grid);

    // residual of the discrete operator on interior rows
    let w = grid.trapezoid_weights();
    let mut w_int = w.clone();
    w_int[0] = 0.0;
    w_int[nr - 1] = 0.0;
    let mut res_modes: Vec<(usize, Vec<f64>)> = Vec::new();
    for &(n, parity) in &jobs {
        let (p, o) = match parity {
            Parity::Cos => (&modes.cos[n], &om.cos[n]),
            Parity::Sin => (&modes.sin[n], &om.sin[n]),
        };
        let mut r = vec![0.0; nr];
        for i in 1..nr - 1 {
            let [a, b, c] = row(&x, i, n, alpha);
            r[i] = a * p[i - 1] + b * p[i] + c * p[i + 1] - o[i];
        }
        res_modes.push((n, r));
    }
    let res_ref: Vec<(usize, &[f64])> = res_modes.iter().map(|(n, r)| (*n, r.as_slice())).collect();
    let res_l2 = modal_l2(&res_ref, &w_int);
    let kept: Vec<(usize, &[f64])> = jobs
        .iter()
        .map(|&(n, parity)| {
            (
                n,
                match parity {
                    Parity::Cos => om.cos[n].as_slice(),
                    Parity::Sin => om.sin[n].as_slice(),
                },
            )
        })
        .collect();
    let omega_l2 = modal_l2(&kept, &w_int);
    let residual_norm = if omega_l2 > 0.0 { res_l2 / omega_l2 } else { res_l2 };

    let dropped: Vec<(usize, &[f64])> = (n_modes..om.n_modes())
        .flat_map(|n| [(n, om.cos[n].as_slice()), (n, om.sin[n].as_slice())])
        .collect();
    let truncated_norm = modal_l2(&dropped, &w);
    let low: Vec<(usize, &[f64])> = (0..2.min(om.n_modes()))
        .flat_map(|n| [(n, om.cos[n].as_slice()), (n, om.sin[n].as_slice())])
        .collect();
    let low_mode_norm = modal_l2(&low, &w);

    Ok(EllipticSolution { alpha, n_modes, modes, psi, residual_norm, error_estimate, truncated_norm, low_mode_norm })
}

/// `(2Ψ + αR∂_RΨ, -αR∂_θΨ)`, the angular and radial transport speeds.
pub fn velocity_from_psi(psi: &Field2D, alpha: f64, transform: &AngularTransform) -> (Field2D, Field2D) {
    let grid = psi.radial();
    let psi_r = radial_derivative(psi);
    let psi_t = transform.theta_derivative(psi, 1);
    let nt = psi.n_theta();
    let mut ang = psi.clone();
    let mut rad = psi_t;
    for (i, &r) in grid.nodes().iter().enumerate() {
        for j in 0..nt {
            let k = i * nt + j;
            ang.values_mut()[k] = 2.0 * psi.values()[k] + alpha * r * psi_r.values()[k];
            rad.values_mut()[k] *= -alpha * r;
        }
    }
    (ang, rad)
}

fn columnwise(field: &Field2D, op: impl Fn(&RadialGrid, &[f64], &mut [f64]) + Sync) -> Field2D {
    let nr = field.n_r();
    let nt = field.n_theta();
    let grid = field.radial();
    let cols: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = (0..nr).map(|i| field.values()[i * nt + j]).collect();
            let mut out = vec![0.0; nr];
            op(grid, &col, &mut out);
            out
        })
        .collect();
    let mut values = vec![0.0; nr * nt];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..nr {
            values[i * nt + j] = col[i];
        }
    }
    Field2D::new(grid.clone(), field.angular(), values).expect("derivative keeps grid shape")
}

/// `∂_R` at every node of the tensor grid.
pub fn radial_derivative(field: &Field2D) -> Field2D {
    columnwise(field, |g, src, dst| g.derivative(src, dst))
}

/// `∂_RR` at every node of the tensor grid.
pub fn radial_second_derivative(field: &Field2D) -> Field2D {
    columnwise(field, |g, src, dst| g.second_derivative(src, dst))
}

/// Convenience wrapper building the angular transform on the fly.
pub fn solve_full_default(omega: &Field2D, alpha: f64) -> Result<EllipticSolution, EllipticError> {
    let tr = AngularTransform::new(omega.angular());
    solve_full(omega, alpha, &SolveOptions::default(), &tr)
}

/// Shared handle for callers that keep one transform per angular grid.
pub fn transform_for(angular: AngularGrid) -> Arc<AngularTransform> {
    Arc::new(AngularTransform::new(angular))
}
