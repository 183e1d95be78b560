use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rieszlab_core::grid::GridError;
use rieszlab_core::{AngularGrid, Field2D, Parity, RadialGrid, RadialProfile, SpacingKind, l2_norm, project_mode, sup_norm};

#[test]
fn uniform_nodes_form_a_progression() {
    let g = RadialGrid::new(0.0, 7.0, 8, SpacingKind::Uniform).unwrap();
    for (i, &r) in g.nodes().iter().enumerate() {
        assert_abs_diff_eq!(r, i as f64, epsilon = 1e-14);
    }
}

#[test]
fn geometric_nodes_form_a_progression() {
    let g = RadialGrid::new(1.0, 4.0, 9, SpacingKind::Geometric).unwrap();
    for (k, &r) in g.nodes().iter().enumerate() {
        assert_abs_diff_eq!(r, 4f64.powf(k as f64 / 8.0), epsilon = 1e-14);
    }
}

#[test]
fn grid_preconditions() {
    assert!(matches!(RadialGrid::new(2.0, 1.0, 16, SpacingKind::Uniform), Err(GridError::BadRange { .. })));
    assert!(matches!(RadialGrid::new(0.0, 1.0, 7, SpacingKind::Uniform), Err(GridError::TooFewNodes { .. })));
    assert!(matches!(RadialGrid::new(0.0, 1.0, 16, SpacingKind::Geometric), Err(GridError::GeometricOrigin(_))));
    assert!(matches!(AngularGrid::new(30), Err(GridError::BadAngular(30))));
    let nodes = vec![0.0, 1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    assert!(matches!(RadialGrid::from_nodes(nodes, SpacingKind::Uniform), Err(GridError::NotIncreasing(3))));
}

#[test]
fn angular_grid_contains_quarter_angles() {
    let a = AngularGrid::new(12).unwrap();
    assert_abs_diff_eq!(a.theta(3), PI / 2.0, epsilon = 1e-15);
    let a = AngularGrid::new(16).unwrap();
    assert_abs_diff_eq!(a.theta(2), PI / 4.0, epsilon = 1e-15);
}

fn indicator_field(n_r: usize, n_t: usize, g: impl Fn(f64) -> f64) -> Field2D {
    let grid = RadialGrid::new(0.0, 3.0, n_r, SpacingKind::Uniform).unwrap();
    let a = AngularGrid::new(n_t).unwrap();
    Field2D::from_fn(grid, a, |r, t| if (1.0..=2.0).contains(&r) { g(t) } else { 0.0 })
}

#[test]
fn sup_norm_examples() {
    let f = indicator_field(31, 16, |t| (2.0 * t).sin());
    assert_abs_diff_eq!(sup_norm(&f), 1.0, epsilon = 1e-15);
    let scaled = f.lincomb(0.01, &f, 0.0);
    assert_abs_diff_eq!(sup_norm(&scaled), 0.01, epsilon = 1e-17);
    let z = Field2D::zeros(f.radial().clone(), f.angular());
    assert_eq!(sup_norm(&z), 0.0);
    assert_eq!(l2_norm(&z), 0.0);
}

#[test]
fn l2_norm_of_indicators_converges() {
    // the trapezoid rule is exact on the constant part; the jump costs O(h)
    let mut prev = f64::INFINITY;
    for n in [31, 301, 3001] {
        let err = (l2_norm(&indicator_field(n, 16, |_| 1.0)) - (2.0 * PI).sqrt()).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 2e-3);
    let s = l2_norm(&indicator_field(3001, 16, |t| (2.0 * t).sin()));
    assert_abs_diff_eq!(s, PI.sqrt(), epsilon = 2e-3);
}

#[test]
fn projection_examples() {
    let grid = RadialGrid::new(0.5, 3.0, 20, SpacingKind::Geometric).unwrap();
    let a = AngularGrid::new(32).unwrap();
    let g = RadialProfile::from_fn(grid.clone(), |r| r * r - 1.0);
    let f = Field2D::separable(&g, a, |t| (2.0 * t).sin());
    let s = project_mode(&f, 2, Parity::Sin).unwrap();
    let c = project_mode(&f, 2, Parity::Cos).unwrap();
    for i in 0..g.len() {
        assert_abs_diff_eq!(s.values()[i], g.values()[i], epsilon = 1e-13);
        assert_abs_diff_eq!(c.values()[i], 0.0, epsilon = 1e-13);
    }
    let f = Field2D::separable(&g, a, |t| (2.0 * t).sin() + 3.0 * (4.0 * t).cos());
    let c4 = project_mode(&f, 4, Parity::Cos).unwrap();
    for i in 0..g.len() {
        assert_abs_diff_eq!(c4.values()[i], 3.0 * g.values()[i], epsilon = 1e-12);
    }
    let z = Field2D::separable(&g, a, |_| 2.0);
    assert_abs_diff_eq!(project_mode(&z, 0, Parity::Cos).unwrap().values()[5], 2.0 * g.values()[5], epsilon = 1e-13);
    assert_eq!(project_mode(&f, 0, Parity::Sin).unwrap_err(), GridError::ParityMismatch);
    assert!(matches!(project_mode(&f, 16, Parity::Cos), Err(GridError::ModeOutOfRange { .. })));
}

#[test]
fn profile_validation() {
    let grid = RadialGrid::new(0.0, 1.0, 8, SpacingKind::Uniform).unwrap();
    assert!(matches!(RadialProfile::new(grid.clone(), vec![0.0; 7]), Err(GridError::LengthMismatch { .. })));
    let mut v = vec![0.0; 8];
    v[3] = f64::NAN;
    assert_eq!(RadialProfile::new(grid, v).unwrap_err(), GridError::NonFinite(3));
}

#[test]
fn profile_support_and_interpolation() {
    let grid = RadialGrid::new(0.0, 7.0, 8, SpacingKind::Uniform).unwrap();
    let p = RadialProfile::new(grid, vec![0.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(p.support(), Some((2, 3)));
    assert_abs_diff_eq!(p.interpolate(2.5).unwrap(), 2.0, epsilon = 1e-15);
    assert!(p.interpolate(7.5).is_none());
}

fn field_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let n = 10 * 8;
    (prop::collection::vec(-5.0..5.0f64, n), prop::collection::vec(-5.0..5.0f64, n))
}

fn make(values: Vec<f64>) -> Field2D {
    let grid = RadialGrid::new(0.1, 2.0, 10, SpacingKind::Geometric).unwrap();
    Field2D::new(grid, AngularGrid::new(8).unwrap(), values).unwrap()
}

proptest! {
    #[test]
    fn norms_are_homogeneous((u, _) in field_strategy(), c in -10.0..10.0f64) {
        let f = make(u);
        let g = f.lincomb(c, &f, 0.0);
        prop_assert!((sup_norm(&g) - c.abs() * sup_norm(&f)).abs() <= 1e-12 * (1.0 + sup_norm(&g)));
        prop_assert!((l2_norm(&g) - c.abs() * l2_norm(&f)).abs() <= 1e-12 * (1.0 + l2_norm(&g)));
    }

    #[test]
    fn norms_satisfy_the_triangle_inequality((u, v) in field_strategy()) {
        let (f, g) = (make(u), make(v));
        let s = f.lincomb(1.0, &g, 1.0);
        prop_assert!(sup_norm(&s) <= sup_norm(&f) + sup_norm(&g) + 1e-12);
        prop_assert!(l2_norm(&s) <= l2_norm(&f) + l2_norm(&g) + 1e-12);
    }

    #[test]
    fn projection_recovers_band_limited_coefficients(
        cos in prop::collection::vec(-3.0..3.0f64, 8),
        sin in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let grid = RadialGrid::new(0.1, 2.0, 8, SpacingKind::Geometric).unwrap();
        let a = AngularGrid::new(16).unwrap();
        let f = Field2D::from_fn(grid, a, |r, t| {
            (0..8).map(|n| r * (cos[n] * (n as f64 * t).cos() + if n > 0 { sin[n] * (n as f64 * t).sin() } else { 0.0 })).sum()
        });
        for n in 0..8 {
            let c = project_mode(&f, n, Parity::Cos).unwrap();
            for (v, r) in c.values().iter().zip(f.radial().nodes()) {
                prop_assert!((v - r * cos[n]).abs() < 1e-12);
            }
            if n > 0 {
                let s = project_mode(&f, n, Parity::Sin).unwrap();
                for (v, r) in s.values().iter().zip(f.radial().nodes()) {
                    prop_assert!((v - r * sin[n]).abs() < 1e-12);
                }
            }
        }
    }
}
