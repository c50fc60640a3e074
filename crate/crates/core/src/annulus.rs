//! Minimal exterior-annulus sampling for the Bers embedding: Chebyshev rings
//! between two radii outside the unit circle, Fourier in angle.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GeometryError;

pub struct AnnulusGrid {
    n_r: usize,
    n_theta: usize,
    r_inner: f64,
    r_outer: f64,
    r_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
    d1: DMatrix<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl AnnulusGrid {
    pub fn new(
        n_r: usize,
        n_theta: usize,
        r_inner: f64,
        r_outer: f64,
    ) -> Result<Arc<Self>, GeometryError> {
        if n_r < 4 || n_theta < 8 || n_theta % 2 != 0 {
            return Err(GeometryError::InvalidParameter(
                "annulus needs n_r >= 4 and even n_theta >= 8".into(),
            ));
        }
        if !(0.0 < r_inner && r_inner < r_outer) {
            return Err(GeometryError::InvalidParameter(
                "need 0 < r_inner < r_outer".into(),
            ));
        }
        let deg = n_r - 1;
        let mid = 0.5 * (r_inner + r_outer);
        let half = 0.5 * (r_outer - r_inner);
        let r_nodes: Vec<f64> = (0..n_r)
            .map(|j| mid + half * (PI * j as f64 / deg as f64).cos())
            .collect();
        let theta_nodes: Vec<f64> = (0..n_theta)
            .map(|k| 2.0 * PI * k as f64 / n_theta as f64)
            .collect();
        let t: Vec<f64> = (0..n_r).map(|j| (PI * j as f64 / deg as f64).cos()).collect();
        let d1 = cheb_d(&t).map(|v| v / half);
        let mut planner = FftPlanner::new();
        Ok(Arc::new(AnnulusGrid {
            n_r,
            n_theta,
            r_inner,
            r_outer,
            r_nodes,
            theta_nodes,
            d1,
            fft_fwd: planner.plan_fft_forward(n_theta),
            fft_inv: planner.plan_fft_inverse(n_theta),
        }))
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.n_theta + k
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.r_nodes[j], self.theta_nodes[k])
    }
}

#[derive(Clone)]
pub struct AnnulusField {
    grid: Arc<AnnulusGrid>,
    values: Vec<Complex64>,
}

impl AnnulusField {
    pub fn zeros(grid: Arc<AnnulusGrid>) -> Self {
        let n = grid.len();
        AnnulusField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: Arc<AnnulusGrid>, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for k in 0..grid.n_theta() {
                values.push(f(grid.node(j, k)));
            }
        }
        AnnulusField { grid, values }
    }

    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `d_z` on the annulus.
    pub fn d_z(&self) -> AnnulusField {
        self.conj().d_zbar().conj()
    }

    pub fn conj(&self) -> AnnulusField {
        AnnulusField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `d_zbar` on the annulus (no parity fold; the origin is outside).
    pub fn d_zbar(&self) -> AnnulusField {
        let g = &self.grid;
        let n_r = g.n_r();
        let n_theta = g.n_theta();
        // to modes
        let mut modes = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
        let mut ring = vec![Complex64::new(0.0, 0.0); n_theta];
        for j in 0..n_r {
            ring.copy_from_slice(&self.values[j * n_theta..(j + 1) * n_theta]);
            g.fft_fwd.process(&mut ring);
            for (slot, v) in ring.iter().enumerate() {
                modes[slot * n_r + j] = v / n_theta as f64;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
        for slot in 0..n_theta {
            if slot == n_theta / 2 {
                continue;
            }
            let m = if slot < n_theta / 2 {
                slot as i64
            } else {
                slot as i64 - n_theta as i64
            };
            let out_m = m + 1;
            let half = n_theta as i64 / 2;
            if out_m <= -half || out_m >= half {
                continue;
            }
            let out_slot = out_m.rem_euclid(n_theta as i64) as usize;
            let profile: Vec<Complex64> =
                modes[slot * n_r..(slot + 1) * n_r].to_vec();
            for i in 0..n_r {
                let mut dp = Complex64::new(0.0, 0.0);
                for j in 0..n_r {
                    dp += g.d1[(i, j)] * profile[j];
                }
                out[out_slot * n_r + i] +=
                    0.5 * (dp - m as f64 / g.r_nodes[i] * profile[i]);
            }
        }
        let mut values = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
        for j in 0..n_r {
            for slot in 0..n_theta {
                ring[slot] = out[slot * n_r + j];
            }
            g.fft_inv.process(&mut ring);
            values[j * n_theta..(j + 1) * n_theta].copy_from_slice(&ring);
        }
        AnnulusField {
            grid: self.grid.clone(),
            values,
        }
    }
}

fn cheb_d(t: &[f64]) -> DMatrix<f64> {
    let n = t.len();
    let deg = n - 1;
    let c = |i: usize| if i == 0 || i == deg { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (t[i] - t[j]);
            }
        }
    }
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += d[(i, j)];
            }
        }
        d[(i, i)] = -s;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_zbar_kills_holomorphic_laurent() {
        let g = AnnulusGrid::new(24, 48, 1.1, 2.0).unwrap();
        let f = AnnulusField::from_fn(g, |z| 1.0 / z + 2.0 / (z * z) + z);
        let d = f.d_zbar();
        assert!(d.sup_norm() < 1e-10, "{}", d.sup_norm());
    }

    #[test]
    fn d_zbar_of_zbar() {
        let g = AnnulusGrid::new(16, 32, 1.2, 1.8).unwrap();
        let f = AnnulusField::from_fn(g, |z| z.conj());
        let d = f.d_zbar();
        let dev = d
            .values()
            .iter()
            .map(|v| (v - Complex64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10);
    }
}
