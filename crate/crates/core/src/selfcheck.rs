//! Self-contained verification suites for the kernel, the elliptic solver
//! and the closed-form model oracle.

use std::fmt;

use crate::elliptic::{ModeOptions, exact_mode2_solution, principal_remainder_split, solve_mode};
use crate::grid::{RadialGrid, RadialProfile, SpacingKind};
use crate::kernel::{KERNEL_TOL, KernelKind, gamma_kernel};
use crate::model::{ModelState, closed_form_profile, horizon, init_state};
use crate::profiles::bump;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn failed(name: impl Into<String>, err: impl fmt::Display) -> Check {
    check(name, false, format!("error: {err}"))
}

fn sech2_half(a: f64) -> f64 {
    let c = (0.5 * a).cosh();
    1.0 / (c * c)
}

/// Observed order from two successive differences at halving steps.
pub fn observed_order(coarse_diff: f64, fine_diff: f64) -> f64 {
    (coarse_diff / fine_diff).log2()
}

const ULP_SLACK: f64 = 8.0 * f64::EPSILON;

pub fn kernel_suite() -> Suite {
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    let mut err = None;
    for a in [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
        match gamma_kernel(a) {
            Ok(k) => worst = worst.max((k.value - sech2_half(a)).abs() / sech2_half(a)),
            Err(e) => err = Some(e),
        }
    }
    checks.push(match err {
        Some(e) => failed("closed form", e),
        None => check("closed form", worst <= 1e-8, format!("max relative deviation {worst:.3e} (limit 1e-8)")),
    });

    let n = 4001;
    let mut bad = 0usize;
    let mut min_lower = f64::INFINITY;
    let mut min_upper = f64::INFINITY;
    let mut err = None;
    for k in 0..n {
        let a = 40.0 * k as f64 / (n - 1) as f64;
        match gamma_kernel(a) {
            Ok(v) => {
                let r = v.value * a.exp();
                min_lower = min_lower.min(r - 1.0);
                min_upper = min_upper.min(4.0 - r);
                // the upper bound is attained to within rounding for large a
                if !(r >= 1.0 - ULP_SLACK && r <= 4.0 * (1.0 + ULP_SLACK)) {
                    bad += 1;
                }
            }
            Err(e) => err = Some(e),
        }
    }
    checks.push(match err {
        Some(e) => failed("exponential sandwich", e),
        None => check(
            "exponential sandwich",
            bad == 0,
            format!("{bad} of {n} samples outside; margins {min_lower:.3e} below, {min_upper:.3e} above"),
        ),
    });

    let mut worst_est = 0.0f64;
    for a in [0.0, 1.0, 10.0, 30.0] {
        if let Ok(k) = gamma_kernel(a) {
            worst_est = worst_est.max(k.error_estimate * a.exp());
        }
    }
    checks.push(check(
        "quadrature error estimate",
        worst_est <= KERNEL_TOL,
        format!("largest reduced-scale estimate {worst_est:.3e} (limit {KERNEL_TOL:.0e})"),
    ));

    Suite { name: "kernel", checks }
}

/// A Gaussian in `ln R` and its image under the mode operator.
fn manufactured(grid: std::sync::Arc<RadialGrid>, n: usize, alpha: f64) -> (RadialProfile, RadialProfile) {
    let (x0, w) = (0.0f64, 0.4f64);
    let k = 4.0 - (n * n) as f64;
    let psi = RadialProfile::from_fn(grid.clone(), |r| (-((r.ln() - x0) / w).powi(2)).exp());
    let omega = RadialProfile::from_fn(grid, |r| {
        let y = r.ln() - x0;
        let p = (-(y / w).powi(2)).exp();
        let d1 = -2.0 * y / (w * w) * p;
        let d2 = (4.0 * y * y / w.powi(4) - 2.0 / (w * w)) * p;
        alpha * alpha * d2 + 4.0 * alpha * d1 + k * p
    });
    (psi, omega)
}

/// Error of the mode solver on the manufactured problem at `n_r` nodes.
pub fn manufactured_error(n: usize, alpha: f64, n_r: usize) -> Result<f64, String> {
    let grid = RadialGrid::new(0.008, 8.0, n_r, SpacingKind::Geometric).map_err(|e| e.to_string())?;
    let (psi, omega) = manufactured(grid, n, alpha);
    let opts = ModeOptions { estimate: false, ..ModeOptions::default() };
    let s = solve_mode(n, &omega, alpha, &opts).map_err(|e| e.to_string())?;
    Ok(s.psi.values().iter().zip(psi.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

pub fn elliptic_suite() -> Suite {
    let mut checks = Vec::new();
    let grid = RadialGrid::new(0.008, 8.0, 1024, SpacingKind::Geometric).expect("valid grid");
    let f = bump(grid, 2.0, 1.0, 1.0).expect("valid bump");

    for alpha in [0.4, 0.2, 0.1, 0.05] {
        let name = format!("mode 2 exact vs grid, alpha {alpha}");
        let exact = exact_mode2_solution(&f, alpha);
        let grid_sol = solve_mode(2, &f, alpha, &ModeOptions::default());
        checks.push(match (exact, grid_sol) {
            (Ok(e), Ok(g)) => {
                let diff = e.psi.values().iter().zip(g.psi.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let budget = e.error_estimate.unwrap_or(0.0) + g.error_estimate.unwrap_or(0.0);
                check(name, diff <= budget, format!("max difference {diff:.3e}, combined estimate {budget:.3e}"))
            }
            (Err(e), _) | (_, Err(e)) => failed(name, e),
        });

        let name = format!("remainder bound, alpha {alpha}");
        checks.push(match principal_remainder_split(&f, alpha) {
            Ok((_, rem)) => {
                let bound = f.sup_abs() / 16.0;
                check(name, rem.sup_abs() <= bound, format!("sup remainder {:.6e}, bound {bound:.6e}", rem.sup_abs()))
            }
            Err(e) => failed(name, e),
        });
    }

    for n in [0usize, 2, 3, 5] {
        let alpha = 0.2;
        let name = format!("manufactured solution, mode {n}");
        let errs: Result<Vec<f64>, String> = [257, 513, 1025].iter().map(|&m| manufactured_error(n, alpha, m)).collect();
        checks.push(match errs {
            Ok(e) => {
                let order = observed_order(e[1], e[2]);
                check(
                    name,
                    (1.8..=2.2).contains(&order),
                    format!("errors {:.3e} {:.3e} {:.3e}, order {order:.3}", e[0], e[1], e[2]),
                )
            }
            Err(e) => failed(name, e),
        });
    }

    Suite { name: "elliptic", checks }
}

/// Largest `|αA - closed form|` relative to the largest closed-form value,
/// for the exponential kernel at time `t` with step `dt`.
pub fn oracle_error(f0: &RadialProfile, alpha: f64, t: f64, dt: f64) -> Result<f64, String> {
    let s = advance_exponential(f0, alpha, t, dt)?;
    let exact = closed_form_profile(f0, alpha, t).map_err(|e| e.to_string())?;
    let scale = exact.sup_abs();
    let diff = s.a.values().iter().zip(exact.values()).fold(0.0f64, |m, (a, e)| m.max((alpha * a - e).abs()));
    Ok(diff / scale)
}

fn advance_exponential(f0: &RadialProfile, alpha: f64, t: f64, dt: f64) -> Result<ModelState, String> {
    let s = init_state(f0.clone(), alpha, KernelKind::Exponential).map_err(|e| e.to_string())?;
    s.advance_to(t, dt).map_err(|e| e.to_string())
}

/// dt-halving order of the model integrator: steps `t/m`, `t/2m`, `t/4m`.
pub fn oracle_order(f0: &RadialProfile, alpha: f64, t: f64, m: usize) -> Result<(f64, f64, f64), String> {
    let runs: Result<Vec<ModelState>, String> =
        [m, 2 * m, 4 * m].iter().map(|&k| advance_exponential(f0, alpha, t, t / k as f64)).collect();
    let runs = runs?;
    let d = |p: &ModelState, q: &ModelState| p.a.values().iter().zip(q.a.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let (d1, d2) = (d(&runs[0], &runs[1]), d(&runs[1], &runs[2]));
    Ok((d1, d2, observed_order(d1, d2)))
}

pub fn oracle_suite() -> Suite {
    let mut checks = Vec::new();
    let grid = RadialGrid::new(0.008, 8.0, 512, SpacingKind::Geometric).expect("valid grid");
    let f0 = bump(grid, 2.0, 1.0, 1.0).expect("valid bump");
    for alpha in [0.4, 0.2, 0.1, 0.05] {
        let t = horizon(alpha, 0.1);
        let name = format!("closed form, alpha {alpha}");
        checks.push(match oracle_error(&f0, alpha, t, alpha / 200.0) {
            Ok(e) => check(name, e <= 1e-6, format!("relative error {e:.3e} at t = {t:.5} (limit 1e-6)")),
            Err(e) => failed(name, e),
        });
        let name = format!("time order, alpha {alpha}");
        checks.push(match oracle_order(&f0, alpha, 10.0 * alpha, 4) {
            Ok((d1, d2, p)) => {
                check(name, (3.7..=4.3).contains(&p), format!("differences {d1:.3e} {d2:.3e}, order {p:.3}"))
            }
            Err(e) => failed(name, e),
        });
    }
    Suite { name: "oracle", checks }
}
