//! Riemann map of a smooth Jordan domain by a real-density Cauchy integral.
//!
//! Writing `sigma(zeta) = (zeta - a) e^{F(zeta)}` with `F` holomorphic, the
//! boundary condition `|sigma| = 1` on `Gamma` becomes a Dirichlet problem
//! `Re F = -log|s - a|`.  `F` is represented as a Cauchy integral with real
//! density, whose boundary jump relation yields a second-kind Nystroem system
//! with the smooth Neumann kernel (Kress, "Linear Integral Equations").
//! Interior values of `F`, `F'` then come from plain trapezoidal Cauchy sums,
//! spectrally accurate away from the boundary curve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::SolveError;

pub struct RiemannMap {
    /// Boundary samples of `Gamma` at uniform parameter values.
    gamma: Vec<Complex64>,
    /// Parametric derivative `d Gamma / dx`.
    gamma_d: Vec<Complex64>,
    density: Vec<f64>,
    center: Complex64,
    /// Interior boundary values `F_+` at the nodes.
    f_plus: Vec<Complex64>,
    n_b: usize,
}

impl RiemannMap {
    /// Builds the map for the curve given by uniform samples `gamma` with
    /// parametric derivative `gamma_d`, normalized by `sigma(center) = 0`.
    pub fn build(
        gamma: Vec<Complex64>,
        gamma_d: Vec<Complex64>,
        center: Complex64,
    ) -> Result<RiemannMap, SolveError> {
        let n_b = gamma.len();
        let dx = 2.0 * PI / n_b as f64;

        // Second parametric derivative by spectral differentiation of gamma_d.
        let gamma_dd = fourier_derivative(&gamma_d);

        let mut a = DMatrix::zeros(n_b, n_b);
        for i in 0..n_b {
            for j in 0..n_b {
                let k = if i == j {
                    // Diagonal limit of Re[s' / (2 pi i (s - t))].
                    (gamma_dd[i] / (4.0 * PI * Complex64::i() * gamma_d[i])).re
                } else {
                    (gamma_d[j] / (2.0 * PI * Complex64::i() * (gamma[j] - gamma[i]))).re
                };
                a[(i, j)] = k * dx + if i == j { 0.5 } else { 0.0 };
            }
        }
        let rhs = DVector::from_fn(n_b, |i, _| -(gamma[i] - center).norm().ln());
        let lu = a.lu();
        let Some(sol) = lu.solve(&rhs) else {
            return Err(SolveError::NoConvergence {
                iterations: 0,
                last_delta: f64::NAN,
            });
        };
        let density: Vec<f64> = sol.iter().copied().collect();

        // Boundary values F_+ = gamma_i/2 + pv-integral, with the singularity
        // subtracted so the trapezoid rule stays spectral.
        let density_d = fourier_derivative_real(&density);
        let mut f_plus = Vec::with_capacity(n_b);
        for i in 0..n_b {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n_b {
                if j == i {
                    acc += Complex64::new(density_d[i], 0.0);
                } else {
                    acc += (density[j] - density[i]) * gamma_d[j] / (gamma[j] - gamma[i]);
                }
            }
            let pv = acc * dx / (2.0 * PI * Complex64::i());
            f_plus.push(Complex64::new(density[i], 0.0) + pv);
        }

        Ok(RiemannMap {
            gamma,
            gamma_d,
            density,
            center,
            f_plus,
            n_b,
        })
    }

    fn f_interior(&self, zeta: Complex64) -> Complex64 {
        let dx = 2.0 * PI / self.n_b as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.n_b {
            acc += self.density[j] * self.gamma_d[j] / (self.gamma[j] - zeta);
        }
        acc * dx / (2.0 * PI * Complex64::i())
    }

    fn f_interior_deriv(&self, zeta: Complex64) -> Complex64 {
        let dx = 2.0 * PI / self.n_b as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.n_b {
            let d = self.gamma[j] - zeta;
            acc += self.density[j] * self.gamma_d[j] / (d * d);
        }
        acc * dx / (2.0 * PI * Complex64::i())
    }

    /// `sigma(zeta)` for interior points away from the curve.
    pub fn eval(&self, zeta: Complex64) -> Complex64 {
        (zeta - self.center) * self.f_interior(zeta).exp()
    }

    /// `(sigma, sigma')`.
    pub fn eval_with_deriv(&self, zeta: Complex64) -> (Complex64, Complex64) {
        let f = self.f_interior(zeta);
        let fd = self.f_interior_deriv(zeta);
        let e = f.exp();
        let s = (zeta - self.center) * e;
        (s, e + s * fd)
    }

    /// Boundary image of node `j` (on the unit circle up to solver error).
    pub fn boundary_value(&self, j: usize) -> Complex64 {
        (self.gamma[j] - self.center) * self.f_plus[j].exp()
    }

    /// Max deviation of the boundary correspondence from the unit circle.
    pub fn boundary_circle_defect(&self) -> f64 {
        (0..self.n_b)
            .map(|j| (self.boundary_value(j).norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Spectral derivative of a periodic complex sequence.
fn fourier_derivative(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let mut planner = rustfft::FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = v.to_vec();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let m = if k < n / 2 {
            k as i64
        } else if k == n / 2 {
            0
        } else {
            k as i64 - n as i64
        };
        *c *= Complex64::new(0.0, m as f64) / n as f64;
    }
    inv.process(&mut buf);
    buf
}

fn fourier_derivative_real(v: &[f64]) -> Vec<f64> {
    let cv: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fourier_derivative(&cv).iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_samples(n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let g = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect::<Vec<_>>();
        let gd = g.iter().map(|z| Complex64::i() * z).collect();
        (g, gd)
    }

    #[test]
    fn unit_circle_gives_identity_up_to_rotation() {
        let (g, gd) = circle_samples(256);
        let m = RiemannMap::build(g, gd, Complex64::new(0.0, 0.0)).unwrap();
        assert!(m.boundary_circle_defect() < 1e-12);
        for &(x, y) in &[(0.3, 0.2), (-0.6, 0.1), (0.0, -0.85)] {
            let z = Complex64::new(x, y);
            assert!((m.eval(z) - z).norm() < 1e-12, "sigma({z}) = {}", m.eval(z));
        }
    }

    #[test]
    fn recovers_inverse_of_polynomial_map() {
        // Omega = J(D) with J(s) = s + 0.15 s^2 + 0.05 i s^3; sigma must be
        // J^{-1} up to a rotation fixing 0, and J(0) = 0 with J'(0) = 1 > 0
        // makes the rotation trivial.
        let n = 512;
        let j_map = |s: Complex64| s + 0.15 * s * s + Complex64::new(0.0, 0.05) * s * s * s;
        let j_d = |s: Complex64| {
            Complex64::new(1.0, 0.0) + 0.3 * s + Complex64::new(0.0, 0.15) * s * s
        };
        let mut g = Vec::with_capacity(n);
        let mut gd = Vec::with_capacity(n);
        for k in 0..n {
            let s = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            g.push(j_map(s));
            gd.push(j_d(s) * Complex64::i() * s);
        }
        let m = RiemannMap::build(g, gd, Complex64::new(0.0, 0.0)).unwrap();
        assert!(m.boundary_circle_defect() < 1e-10);
        // Interior points: sigma(J(s)) should be e^{i beta} s with beta ~ 0.
        let s0 = Complex64::new(0.40, 0.10);
        let rot = m.eval(j_map(s0)) / s0;
        assert!((rot.norm() - 1.0).abs() < 1e-10);
        for &(x, y) in &[(0.1, -0.3), (-0.5, 0.4), (0.7, 0.0)] {
            let s = Complex64::new(x, y);
            let got = m.eval(j_map(s));
            assert!((got - rot * s).norm() < 1e-10, "at {s}: {got}");
        }
        // Derivative chain: sigma'(J(s)) J'(s) = rot.
        let (_, sd) = m.eval_with_deriv(j_map(s0));
        assert!((sd * j_d(s0) - rot).norm() < 1e-9);
    }
}
