//! Three-point finite-difference weights on nonuniform node sets.

/// Weights `(w_left, w_center, w_right)` for the first derivative at an
/// interior node with spacings `h1 = x_i - x_{i-1}` and `h2 = x_{i+1} - x_i`.
#[inline]
pub fn first_interior(h1: f64, h2: f64) -> [f64; 3] {
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

/// Weights for the second derivative at an interior node.
#[inline]
pub fn second_interior(h1: f64, h2: f64) -> [f64; 3] {
    [
        2.0 / (h1 * (h1 + h2)),
        -2.0 / (h1 * h2),
        2.0 / (h2 * (h1 + h2)),
    ]
}

/// One-sided first derivative at `x_0` from nodes `x_0, x_1, x_2`.
#[inline]
fn first_left(h1: f64, h2: f64) -> [f64; 3] {
    [
        -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
        (h1 + h2) / (h1 * h2),
        -h1 / (h2 * (h1 + h2)),
    ]
}

/// One-sided first derivative at `x_2` from nodes `x_0, x_1, x_2`.
#[inline]
fn first_right(h1: f64, h2: f64) -> [f64; 3] {
    [
        h2 / (h1 * (h1 + h2)),
        -(h1 + h2) / (h1 * h2),
        (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
    ]
}

/// Second-order first derivative of `f` sampled on `x`, with one-sided
/// three-point closures at both ends.
pub fn derivative(x: &[f64], f: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 3 && f.len() == n && out.len() == n);
    let w = first_left(x[1] - x[0], x[2] - x[1]);
    out[0] = w[0] * f[0] + w[1] * f[1] + w[2] * f[2];
    for i in 1..n - 1 {
        let w = first_interior(x[i] - x[i - 1], x[i + 1] - x[i]);
        out[i] = w[0] * f[i - 1] + w[1] * f[i] + w[2] * f[i + 1];
    }
    let w = first_right(x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    out[n - 1] = w[0] * f[n - 3] + w[1] * f[n - 2] + w[2] * f[n - 1];
}

/// Second derivative of `f` sampled on `x`; the end values reuse the
/// adjacent three-point stencil.
pub fn second_derivative(x: &[f64], f: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert!(n >= 3 && f.len() == n && out.len() == n);
    for i in 1..n - 1 {
        let w = second_interior(x[i] - x[i - 1], x[i + 1] - x[i]);
        out[i] = w[0] * f[i - 1] + w[1] * f[i] + w[2] * f[i + 1];
    }
    // first-order closures
    let w = second_interior(x[1] - x[0], x[2] - x[1]);
    out[0] = w[0] * f[0] + w[1] * f[1] + w[2] * f[2];
    let w = second_interior(x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    out[n - 1] = w[0] * f[n - 3] + w[1] * f[n - 2] + w[2] * f[n - 1];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratics_on_nonuniform_nodes() {
        let x: Vec<f64> = (0..12).map(|i| 0.3 * (i as f64).powf(1.3)).collect();
        let f: Vec<f64> = x.iter().map(|&x| 2.0 * x * x - 3.0 * x + 1.0).collect();
        let mut d = vec![0.0; x.len()];
        let mut dd = vec![0.0; x.len()];
        derivative(&x, &f, &mut d);
        second_derivative(&x, &f, &mut dd);
        for i in 0..x.len() {
            assert!((d[i] - (4.0 * x[i] - 3.0)).abs() < 1e-10, "d at {i}");
            assert!((dd[i] - 4.0).abs() < 1e-9, "dd at {i}");
        }
    }
}
