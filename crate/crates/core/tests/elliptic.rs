use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rieszlab_core::elliptic::{
    EllipticError, Mode2Path, ModeOptions, SolveOptions, exact_mode2, exact_mode2_profile, exact_mode2_solution,
    principal_remainder_split, solve_full, solve_mode, velocity_from_psi,
};
use rieszlab_core::kernel::{op_l, tail_profile};
use rieszlab_core::profiles::{bump, indicator};
use rieszlab_core::spectral::AngularTransform;
use rieszlab_core::{AngularGrid, Field2D, Parity, RadialGrid, RadialProfile, SpacingKind, l2_norm, project_mode, sup_norm};

fn geometric(n: usize) -> Arc<RadialGrid> {
    RadialGrid::new(0.008, 8.0, n, SpacingKind::Geometric).unwrap()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

// Ψ = exp(-(ln R - c)²/w²) and its image under the mode operator.
fn manufactured(g: Arc<RadialGrid>, n: usize, alpha: f64) -> (RadialProfile, RadialProfile) {
    let (c, w) = (0.3f64, 0.5f64);
    let psi = RadialProfile::from_fn(g.clone(), |r| (-((r.ln() - c) / w).powi(2)).exp());
    let omega = RadialProfile::from_fn(g, |r| {
        let y = r.ln() - c;
        let p = (-(y / w).powi(2)).exp();
        let p1 = -2.0 * y / (w * w) * p;
        let p2 = (4.0 * y * y / w.powi(4) - 2.0 / (w * w)) * p;
        // R∂_R = ∂_x and R²∂_RR = ∂_xx - ∂_x
        alpha * alpha * (p2 - p1) + (4.0 * alpha + alpha * alpha) * p1 + (4.0 - (n * n) as f64) * p
    });
    (psi, omega)
}

#[test]
fn zero_vorticity_gives_zero() {
    let z = RadialProfile::zeros(geometric(128));
    for n in 0..8 {
        let s = solve_mode(n, &z, 0.3, &ModeOptions::default()).unwrap();
        assert!(s.psi.values().iter().all(|&v| v == 0.0));
    }
    assert_eq!(exact_mode2(&z, 0.3, 2.0).unwrap(), 0.0);
    let (p, r) = principal_remainder_split(&z, 0.3).unwrap();
    assert!(p.values().iter().chain(r.values()).all(|&v| v == 0.0));
}

#[test]
fn solver_preconditions() {
    let f = bump(geometric(128), 2.0, 1.0, 1.0).unwrap();
    assert_eq!(solve_mode(3, &f, 1.0, &ModeOptions::default()).unwrap_err(), EllipticError::AlphaRange(1.0));
    let u = RadialGrid::new(0.0, 8.0, 128, SpacingKind::Uniform).unwrap();
    let fu = bump(u, 2.0, 1.0, 1.0).unwrap();
    assert_eq!(solve_mode(3, &fu, 0.3, &ModeOptions::default()).unwrap_err(), EllipticError::OriginNode);
    let strict = ModeOptions { rel_tol: 1e-8, ..ModeOptions::default() };
    assert!(matches!(solve_mode(4, &f, 0.2, &strict), Err(EllipticError::GridTooCoarse { .. })));
    let near = RadialGrid::new(1.0, 3.0, 256, SpacingKind::Geometric).unwrap();
    let fb = bump(near, 2.0, 0.99, 1.0).unwrap();
    let opts = ModeOptions { estimate: false, ..ModeOptions::default() };
    assert!(matches!(solve_mode(3, &fb, 0.9, &opts), Err(EllipticError::UnresolvedBoundary { .. })));
}

#[test]
fn mode2_of_an_indicator() {
    let alpha = 0.5;
    let exact = -0.5 * 2f64.powi(-8) * 255.0 / 8.0;
    assert_abs_diff_eq!(exact, -0.062_256, epsilon = 1e-6);
    let u = RadialGrid::new(0.0, 4.0, 8001, SpacingKind::Uniform).unwrap();
    let f = indicator(u, 1.0, 2.0, 1.0).unwrap();
    assert_abs_diff_eq!(exact_mode2(&f, alpha, 2.0).unwrap(), exact, epsilon = 2e-4);

    // the grid path agrees with the closed form to within both estimates
    let g = RadialGrid::new(0.01, 8.0, 2048, SpacingKind::Geometric).unwrap();
    let f = indicator(g, 1.0, 2.0, 1.0).unwrap();
    let e = exact_mode2_solution(&f, alpha).unwrap();
    let s = solve_mode(2, &f, alpha, &ModeOptions::default()).unwrap();
    let budget = e.error_estimate.unwrap() + s.error_estimate.unwrap();
    assert!(sup_diff(e.psi.values(), s.psi.values()) <= budget);
}

#[test]
fn mode2_below_the_support_is_the_principal_part() {
    let f = bump(geometric(512), 2.0, 1.0, 1.0).unwrap();
    for alpha in [0.4, 0.1] {
        let v = exact_mode2(&f, alpha, 0.5).unwrap();
        let l0 = op_l(&f, 0.008).unwrap();
        assert_abs_diff_eq!(v, -l0 / (4.0 * alpha), epsilon = 1e-12);
    }
}

#[test]
fn manufactured_solutions_converge_at_second_order() {
    for n in [0usize, 1, 2, 3, 4, 6] {
        for alpha in [0.4, 0.1] {
            let errs: Vec<f64> = [257, 513, 1025]
                .iter()
                .map(|&m| {
                    let (psi, omega) = manufactured(geometric(m), n, alpha);
                    let opts = ModeOptions { estimate: false, ..ModeOptions::default() };
                    let s = solve_mode(n, &omega, alpha, &opts).unwrap();
                    sup_diff(s.psi.values(), psi.values())
                })
                .collect();
            let order = (errs[1] / errs[2]).log2();
            assert!((1.8..=2.2).contains(&order), "n {n} alpha {alpha}: {errs:?}");
        }
    }
}

#[test]
fn modes_decay_at_both_ends() {
    let f = bump(geometric(512), 2.0, 1.0, 1.0).unwrap();
    for n in [2usize, 3, 5, 8] {
        let s = solve_mode(n, &f, 0.2, &ModeOptions::default()).unwrap();
        let v = s.psi.values();
        let scale = s.psi.sup_abs();
        assert!(v[v.len() - 1].abs() <= 1e-4 * scale, "n {n}");
        if n >= 3 {
            assert!(v[0].abs() <= 1e-4 * scale, "n {n}");
        }
    }
}

#[test]
fn exact_mode2_satisfies_the_ode_at_second_order() {
    let alpha = 0.2;
    let res = |m: usize| {
        let g = geometric(m);
        let f = bump(g.clone(), 2.0, 1.0, 1.0).unwrap();
        let p = exact_mode2_profile(&f, alpha).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|r| r.ln()).collect();
        let v = p.values();
        let mut worst = 0.0f64;
        for i in 1..m - 1 {
            let h = x[i + 1] - x[i];
            let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            worst = worst.max((alpha * alpha * d2 + 4.0 * alpha * d1 - f.values()[i]).abs());
        }
        worst
    };
    // the decay rate 4/α must be resolved before the order shows
    let r: Vec<f64> = [1025, 2049, 4097].iter().map(|&m| res(m)).collect();
    let order = (r[1] / r[2]).log2();
    assert!((1.8..=2.2).contains(&order), "{r:?}");
}

#[test]
fn remainder_stays_bounded_while_the_principal_part_grows() {
    let f = bump(geometric(1024), 2.0, 1.0, 1.0).unwrap();
    let fl2 = f.values().iter().zip(f.grid().trapezoid_weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    let mut prev = 0.0;
    for alpha in [0.4, 0.2, 0.1, 0.05] {
        let (p, r) = principal_remainder_split(&f, alpha).unwrap();
        assert!(r.sup_abs() <= f.sup_abs() / 16.0);
        assert!(p.sup_abs() > prev);
        assert_abs_diff_eq!(alpha * p.sup_abs(), tail_profile(&f).unwrap().sup_abs() / 4.0, epsilon = 1e-14);
        prev = p.sup_abs();
        let rl2 = r.values().iter().zip(f.grid().trapezoid_weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
        // Schur test for the weighted head operator in L²(dR)
        assert!(rl2 / fl2 <= 1.0 / (16.0 - 2.0 * alpha), "alpha {alpha}: {}", rl2 / fl2);
    }
}

fn band_field(g: Arc<RadialGrid>, a: AngularGrid, coeffs: &[(usize, Parity, f64)]) -> Field2D {
    let f = bump(g, 2.0, 1.0, 1.0).unwrap();
    Field2D::separable(&f, a, |t| {
        coeffs
            .iter()
            .map(|&(n, p, c)| match p {
                Parity::Cos => c * (n as f64 * t).cos(),
                Parity::Sin => c * (n as f64 * t).sin(),
            })
            .sum()
    })
}

#[test]
fn single_modes_stay_single() {
    let g = geometric(512);
    let a = AngularGrid::new(64).unwrap();
    let tr = AngularTransform::new(a);
    let omega = band_field(g.clone(), a, &[(2, Parity::Sin, 1.0)]);
    let sol = solve_full(&omega, 0.2, &SolveOptions::default(), &tr).unwrap();
    let psi2 = sol.mode(2, Parity::Sin);
    let scale = psi2.sup_abs();
    let exact = exact_mode2_profile(&bump(g, 2.0, 1.0, 1.0).unwrap(), 0.2).unwrap();
    assert!(sup_diff(psi2.values(), exact.values()) <= 1e-12 * scale);
    for n in 0..sol.n_modes {
        for p in [Parity::Cos, Parity::Sin] {
            if (n, p) != (2, Parity::Sin) && !(n == 0 && p == Parity::Sin) {
                assert!(sol.mode(n, p).sup_abs() <= 1e-10 * scale, "mode {n} {p:?}");
            }
        }
    }
    let z = Field2D::zeros(omega.radial().clone(), a);
    assert_eq!(sup_norm(&solve_full(&z, 0.2, &SolveOptions::default(), &tr).unwrap().psi), 0.0);
}

#[test]
fn band_limited_residual() {
    let g = geometric(512);
    let a = AngularGrid::new(64).unwrap();
    let tr = AngularTransform::new(a);
    let omega = band_field(
        g,
        a,
        &[(0, Parity::Cos, 0.3), (1, Parity::Sin, -0.7), (3, Parity::Cos, 0.5), (5, Parity::Sin, 0.2), (7, Parity::Cos, -0.4)],
    );
    let opts = SolveOptions { mode2: Mode2Path::Grid, ..SolveOptions::default() };
    let sol = solve_full(&omega, 0.2, &opts, &tr).unwrap();
    assert!(sol.residual_norm <= 1e-6, "{}", sol.residual_norm);
    assert!(sol.low_mode_norm > 0.0);
    assert!(sol.truncated_norm <= 1e-12 * l2_norm(&omega));
    for (n, p) in [(3, Parity::Cos), (5, Parity::Sin)] {
        let direct = solve_mode(n, &project_mode(&omega, n, p).unwrap(), 0.2, &ModeOptions::default()).unwrap();
        assert!(sup_diff(sol.mode(n, p).values(), direct.psi.values()) <= 1e-12 * direct.psi.sup_abs());
    }
    assert!(l2_norm(&sol.psi) > 0.0);
}

#[test]
fn too_many_modes_are_rejected() {
    let a = AngularGrid::new(16).unwrap();
    let tr = AngularTransform::new(a);
    let omega = band_field(geometric(128), a, &[(2, Parity::Sin, 1.0)]);
    let opts = SolveOptions { n_modes: Some(12), ..SolveOptions::default() };
    assert!(matches!(solve_full(&omega, 0.2, &opts, &tr), Err(EllipticError::TooManyModes { .. })));
}

#[test]
fn velocities_of_simple_stream_functions() {
    let g = geometric(512);
    let a = AngularGrid::new(32).unwrap();
    let tr = AngularTransform::new(a);
    let z = Field2D::zeros(g.clone(), a);
    let (ang, rad) = velocity_from_psi(&z, 0.2, &tr);
    assert_eq!((sup_norm(&ang), sup_norm(&rad)), (0.0, 0.0));

    let alpha = 0.3;
    let prof = bump(g.clone(), 2.0, 1.0, 1.0).unwrap();
    let psi = Field2D::separable(&prof, a, |t| (2.0 * t).sin());
    let (_, rad) = velocity_from_psi(&psi, alpha, &tr);
    for (i, &r) in g.nodes().iter().enumerate() {
        for j in 0..32 {
            let want = -2.0 * alpha * r * prof.values()[i] * (2.0 * a.theta(j)).cos();
            assert_abs_diff_eq!(rad.get(i, j), want, epsilon = 1e-12);
        }
    }
}

#[test]
fn angular_speed_tracks_the_model_transport() {
    // at θ = π/4 the speed is -L/(2α) plus terms that stay bounded in α
    let g = geometric(1024);
    let a = AngularGrid::new(16).unwrap();
    let tr = AngularTransform::new(a);
    let f = bump(g.clone(), 2.0, 1.0, 1.0).unwrap();
    let l = tail_profile(&f).unwrap();
    let j = (FRAC_PI_4 / a.spacing()).round() as usize;
    for alpha in [0.4, 0.2, 0.1, 0.05] {
        let psi2 = exact_mode2_profile(&f, alpha).unwrap();
        let psi = Field2D::separable(&psi2, a, |t| (2.0 * t).sin());
        let (ang, _) = velocity_from_psi(&psi, alpha, &tr);
        let gap = (0..g.len()).fold(0.0f64, |m, i| m.max((ang.get(i, j) + l.values()[i] / (2.0 * alpha)).abs()));
        assert!(gap <= f.sup_abs(), "alpha {alpha}: {gap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn remainder_bound_holds_for_any_profile(vals in prop::collection::vec(-3.0..3.0f64, 40), alpha in 0.02..0.98f64) {
        let g = RadialGrid::new(0.5, 4.0, 48, SpacingKind::Geometric).unwrap();
        let mut v = vec![0.0; 48];
        v[4..44].copy_from_slice(&vals);
        let f = RadialProfile::new(g, v).unwrap();
        let (_, r) = principal_remainder_split(&f, alpha).unwrap();
        prop_assert!(r.sup_abs() <= f.sup_abs() / 16.0 * (1.0 + 1e-14));
    }

    #[test]
    fn mode_solves_are_linear(
        c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, n in 0usize..7, alpha in 0.1..0.6f64,
    ) {
        let g = geometric(256);
        let f = bump(g.clone(), 2.0, 1.0, 1.0).unwrap();
        let h = bump(g.clone(), 3.0, 0.8, 1.0).unwrap();
        let mix = RadialProfile::from_fn(g, |r| c1 * f.interpolate(r).unwrap() + c2 * h.interpolate(r).unwrap());
        // cancellation in the mix can shrink max |psi| below the truncation check
        let opts = ModeOptions { estimate: false, boundary_tol: 1.0, ..ModeOptions::default() };
        let sf = solve_mode(n, &f, alpha, &opts).unwrap();
        let sh = solve_mode(n, &h, alpha, &opts).unwrap();
        let sm = solve_mode(n, &mix, alpha, &opts).unwrap();
        let scale = sf.psi.sup_abs().max(sh.psi.sup_abs());
        for i in 0..sm.psi.len() {
            let want = c1 * sf.psi.values()[i] + c2 * sh.psi.values()[i];
            prop_assert!((sm.psi.values()[i] - want).abs() <= 1e-11 * scale);
        }
    }
}
