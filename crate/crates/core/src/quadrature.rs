//! Adaptive Gauss–Kronrod integration and cumulative tail rules on node sets.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive G7K15 quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `abs_tol` or `max_intervals` is reached. The returned
/// error is the summed Gauss–Kronrod difference, which is conservative for
/// smooth integrands.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> Integral {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total_err = e;
    while total_err > abs_tol && parts.len() < max_intervals {
        let (worst, _) = parts
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            parts.push((lo, hi, 0.0, 0.0));
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        total_err = parts.iter().map(|p| p.3).sum();
    }
    // sum in order of position for reproducibility
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Integral {
        value: parts.iter().map(|p| p.2).sum(),
        error: total_err,
        intervals: parts.len(),
    }
}

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

fn lagrange_basis(nodes: &[f64; 4], x: f64) -> [f64; 4] {
    let mut out = [1.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        for m in 0..4 {
            if m != k {
                *o *= (x - nodes[m]) / (nodes[k] - nodes[m]);
            }
        }
    }
    out
}

/// Fourth-order cumulative integration weights on a fixed node set.
///
/// On each interval `[x_j, x_{j+1}]` the integrand is replaced by the cubic
/// through four adjacent nodes and integrated exactly. When both endpoint
/// values share a sign and the cubic integral does not, the interval falls
/// back to the trapezoid rule, so nonnegative data have nonnegative,
/// monotone tails and data vanishing on an interval contribute nothing.
#[derive(Debug, Clone)]
pub struct CubicRule {
    // first node of the stencil used on interval j
    start: Vec<usize>,
    // weights of the four stencil nodes for the integral over interval j
    weights: Vec<[f64; 4]>,
    widths: Vec<f64>,
}

impl CubicRule {
    /// Requires at least four strictly increasing nodes.
    pub fn new(x: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 4, "cubic rule needs at least four nodes");
        let mut start = Vec::with_capacity(n - 1);
        let mut weights = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let s = j.saturating_sub(1).min(n - 4);
            let nodes = [x[s], x[s + 1], x[s + 2], x[s + 3]];
            start.push(s);
            weights.push(Self::segment_weights(&nodes, x[j], x[j + 1]));
        }
        let widths = x.windows(2).map(|w| w[1] - w[0]).collect();
        CubicRule { start, weights, widths }
    }

    fn segment_weights(nodes: &[f64; 4], a: f64, b: f64) -> [f64; 4] {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut w = [0.0; 4];
        for q in 0..4 {
            let l = lagrange_basis(nodes, c + h * GL4_X[q]);
            for k in 0..4 {
                w[k] += h * GL4_W[q] * l[k];
            }
        }
        w
    }

    pub fn n_intervals(&self) -> usize {
        self.start.len()
    }

    /// Integral of the interpolant over interval `j`.
    pub fn interval(&self, j: usize, values: &[f64]) -> f64 {
        self.interval_with(j, values, zero_level(values))
    }

    #[inline]
    fn interval_with(&self, j: usize, values: &[f64], tiny: f64) -> f64 {
        let s = self.start[j];
        let w = &self.weights[j];
        let cubic = w[0] * values[s] + w[1] * values[s + 1] + w[2] * values[s + 2] + w[3] * values[s + 3];
        limit(cubic, values[j], values[j + 1], self.widths[j], tiny)
    }

    /// Sum of the interval integrals from interval `j` to the last node.
    pub fn sum_from(&self, j: usize, values: &[f64]) -> f64 {
        let tiny = zero_level(values);
        (j..self.n_intervals()).map(|k| self.interval_with(k, values, tiny)).sum()
    }

    /// `out[i]` = integral from `x_i` to the last node.
    pub fn tail(&self, values: &[f64], out: &mut [f64]) {
        let n = self.start.len() + 1;
        debug_assert!(values.len() == n && out.len() == n);
        let tiny = zero_level(values);
        out[n - 1] = 0.0;
        for j in (0..n - 1).rev() {
            out[j] = out[j + 1] + self.interval_with(j, values, tiny);
        }
    }

    /// Integral of the interpolant over `[a, x_{j+1}]` with `a` inside
    /// interval `j`.
    pub fn partial(&self, x: &[f64], j: usize, a: f64, values: &[f64]) -> f64 {
        let s = self.start[j];
        let nodes = [x[s], x[s + 1], x[s + 2], x[s + 3]];
        let w = Self::segment_weights(&nodes, a, x[j + 1]);
        let cubic = w[0] * values[s] + w[1] * values[s + 1] + w[2] * values[s + 2] + w[3] * values[s + 3];
        let t = (a - x[j]) / (x[j + 1] - x[j]);
        let fa = values[j] * (1.0 - t) + values[j + 1] * t;
        limit(cubic, fa, values[j + 1], x[j + 1] - a, zero_level(values))
    }
}

// Values this small relative to the data count as zero in the sign test,
// so rounding noise does not switch the limiter on and off.
fn zero_level(values: &[f64]) -> f64 {
    1e-13 * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[inline]
fn limit(cubic: f64, fa: f64, fb: f64, width: f64, tiny: f64) -> f64 {
    let snap = |v: f64| if v.abs() <= tiny { 0.0 } else { v };
    let (fa, fb) = (snap(fa), snap(fb));
    if (fa >= 0.0 && fb >= 0.0 && cubic < 0.0) || (fa <= 0.0 && fb <= 0.0 && cubic > 0.0) {
        0.5 * width * (fa + fb)
    } else {
        cubic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x * x, -1.0, 2.0, 1e-14, 50);
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * 9.0 / 3.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn adaptive_resolves_narrow_peak() {
        let b = 1e-4;
        let r = integrate(|x| b / (x * x + b * b), 0.0, 1.0, 1e-12, 2000);
        let exact = (1.0 / b).atan();
        assert!((r.value - exact).abs() < 1e-10, "{} vs {}", r.value, exact);
    }

    #[test]
    fn cubic_tail_exact_for_cubics() {
        let x: Vec<f64> = (0..20).map(|i| 0.1 * 1.2f64.powi(i)).collect();
        let f: Vec<f64> = x.iter().map(|&x| x * x * x - x + 2.0).collect();
        let rule = CubicRule::new(&x);
        let mut t = vec![0.0; x.len()];
        rule.tail(&f, &mut t);
        let anti = |x: f64| x.powi(4) / 4.0 - x * x / 2.0 + 2.0 * x;
        let last = *x.last().unwrap();
        for i in 0..x.len() {
            let exact = anti(last) - anti(x[i]);
            assert!((t[i] - exact).abs() < 1e-9 * exact.abs().max(1.0));
        }
        let p = rule.partial(&x, 5, 0.5 * (x[5] + x[6]), &f);
        assert!((p - (anti(x[6]) - anti(0.5 * (x[5] + x[6])))).abs() < 1e-12);
    }

    #[test]
    fn tails_of_nonnegative_data_are_monotone() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = x.iter().map(|&x| if (1.0..2.0).contains(&x) { (-1.0 / (x - 0.99)).exp() } else { 0.0 }).collect();
        let rule = CubicRule::new(&x);
        let mut t = vec![0.0; x.len()];
        rule.tail(&f, &mut t);
        for i in 0..x.len() - 1 {
            assert!(t[i] >= t[i + 1] && t[i + 1] >= 0.0);
        }
        assert!(t[25..].iter().all(|&v| v == 0.0));
    }
}
