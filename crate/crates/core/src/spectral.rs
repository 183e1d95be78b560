//! Real Fourier analysis and synthesis along the angular direction.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{AngularGrid, Field2D, RadialGrid};

/// Cosine and sine coefficients of every row, indexed `[n][i_r]`, for
/// `0 <= n < n_theta / 2`. `sin[0]` is identically zero.
#[derive(Debug, Clone)]
pub struct ModeCoefficients {
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
}

impl ModeCoefficients {
    pub fn zeros(n_modes: usize, n_r: usize) -> Self {
        ModeCoefficients { cos: vec![vec![0.0; n_r]; n_modes], sin: vec![vec![0.0; n_r]; n_modes] }
    }

    pub fn n_modes(&self) -> usize {
        self.cos.len()
    }

    /// Angular derivative of order `k` applied coefficientwise.
    pub fn theta_derivative(&self, k: u32) -> ModeCoefficients {
        let mut out = self.clone();
        for n in 0..self.n_modes() {
            let nf = n as f64;
            for i in 0..self.cos[n].len() {
                let (mut a, mut b) = (self.cos[n][i], self.sin[n][i]);
                for _ in 0..k {
                    let (na, nb) = (nf * b, -nf * a);
                    a = na;
                    b = nb;
                }
                out.cos[n][i] = a;
                out.sin[n][i] = b;
            }
        }
        out
    }
}

/// FFT plans for one angular resolution.
#[derive(Clone)]
pub struct AngularTransform {
    angular: AngularGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AngularTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularTransform").field("n_theta", &self.angular.len()).finish()
    }
}

impl AngularTransform {
    pub fn new(angular: AngularGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(angular.len());
        let inverse = planner.plan_fft_inverse(angular.len());
        AngularTransform { angular, forward, inverse }
    }

    pub fn angular(&self) -> AngularGrid {
        self.angular
    }

    pub fn analyze(&self, field: &Field2D) -> ModeCoefficients {
        let nt = self.angular.len();
        let nm = self.angular.nyquist();
        let nr = field.n_r();
        let rows: Vec<Vec<Complex<f64>>> = (0..nr)
            .into_par_iter()
            .map(|i| {
                let mut buf: Vec<Complex<f64>> = field.row(i).iter().map(|&v| Complex::new(v, 0.0)).collect();
                self.forward.process(&mut buf);
                buf
            })
            .collect();
        let mut out = ModeCoefficients::zeros(nm, nr);
        let scale = 2.0 / nt as f64;
        for (i, row) in rows.iter().enumerate() {
            out.cos[0][i] = row[0].re / nt as f64;
            for n in 1..nm {
                out.cos[n][i] = scale * row[n].re;
                out.sin[n][i] = -scale * row[n].im;
            }
        }
        out
    }

    /// Inverse of [`analyze`](Self::analyze); modes beyond `coeffs.n_modes()`
    /// are zero.
    pub fn synthesize(&self, coeffs: &ModeCoefficients, radial: &Arc<RadialGrid>) -> Field2D {
        let nt = self.angular.len();
        let nr = radial.len();
        let nm = coeffs.n_modes().min(self.angular.nyquist());
        let half = 0.5 * nt as f64;
        let mut values = vec![0.0; nr * nt];
        values.par_chunks_mut(nt).enumerate().for_each(|(i, out)| {
            let mut buf = vec![Complex::new(0.0, 0.0); nt];
            buf[0] = Complex::new(nt as f64 * coeffs.cos[0][i], 0.0);
            for n in 1..nm {
                let c = Complex::new(half * coeffs.cos[n][i], -half * coeffs.sin[n][i]);
                buf[n] = c;
                buf[nt - n] = c.conj();
            }
            self.inverse.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o = b.re / nt as f64;
            }
        });
        Field2D::new(radial.clone(), self.angular, values).expect("synthesized field has grid shape")
    }

    /// Spectral angular derivative of order `k`.
    pub fn theta_derivative(&self, field: &Field2D, k: u32) -> Field2D {
        let c = self.analyze(field);
        self.synthesize(&c.theta_derivative(k), field.radial())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpacingKind;

    #[test]
    fn round_trip_and_derivative() {
        let g = RadialGrid::new(0.5, 2.0, 8, SpacingKind::Uniform).unwrap();
        let a = AngularGrid::new(32).unwrap();
        let f = Field2D::from_fn(g.clone(), a, |r, t| r * (3.0 * t).sin() + (t).cos() - r * r * (7.0 * t).cos());
        let tr = AngularTransform::new(a);
        let c = tr.analyze(&f);
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((c.sin[3][i] - r).abs() < 1e-13);
            assert!((c.cos[7][i] + r * r).abs() < 1e-13);
        }
        let back = tr.synthesize(&c, &g);
        for (x, y) in back.values().iter().zip(f.values()) {
            assert!((x - y).abs() < 1e-13);
        }
        let d = tr.theta_derivative(&f, 1);
        let exact = Field2D::from_fn(g, a, |r, t| 3.0 * r * (3.0 * t).cos() - t.sin() + 7.0 * r * r * (7.0 * t).sin());
        for (x, y) in d.values().iter().zip(exact.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
