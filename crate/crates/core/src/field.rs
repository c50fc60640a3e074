//! Function samples on a [`DiscGrid`] and their quadrature / interpolation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::GeometryError;
use crate::grid::{barycentric_row, barycentric_weights, clenshaw, DiscGrid};

/// Complex samples, node-indexed (`ring * n_theta + angle`).
#[derive(Clone)]
pub struct ComplexField {
    grid: Arc<DiscGrid>,
    values: Vec<Complex64>,
}

/// Real samples on the same layout.
#[derive(Clone)]
pub struct RealField {
    grid: Arc<DiscGrid>,
    values: Vec<f64>,
}

impl ComplexField {
    pub fn new(grid: Arc<DiscGrid>, values: Vec<Complex64>) -> Result<Self, GeometryError> {
        if values.len() != grid.len() {
            return Err(GeometryError::InvalidParameter(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "non-finite field entry".into(),
            ));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: Arc<DiscGrid>) -> Self {
        let n = grid.len();
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Samples `f(z)` at every node.
    pub fn from_fn(grid: Arc<DiscGrid>, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for k in 0..grid.n_theta() {
                values.push(f(grid.node(j, k)));
            }
        }
        ComplexField { grid, values }
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField, GeometryError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField, GeometryError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ComplexField) -> Result<ComplexField, GeometryError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<ComplexField, GeometryError> {
        if !DiscGrid::same_grid(&self.grid, &other.grid) {
            return Err(GeometryError::GridMismatch);
        }
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Quadrature of the field over the truncated disc.
    pub fn integrate(&self) -> Complex64 {
        let w = self.grid.quad_weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, w) in self.values.iter().zip(w) {
            acc += v * *w;
        }
        acc
    }

    pub fn re(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    /// Spectral interpolant for off-node evaluation.
    pub fn interpolant(&self) -> Interpolant {
        Interpolant::build(self)
    }
}

impl RealField {
    pub fn new(grid: Arc<DiscGrid>, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != grid.len() {
            return Err(GeometryError::InvalidParameter(
                "field length does not match grid size".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "non-finite field entry".into(),
            ));
        }
        Ok(RealField { grid, values })
    }

    pub fn from_fn(grid: Arc<DiscGrid>, mut f: impl FnMut(Complex64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for k in 0..grid.n_theta() {
                values.push(f(grid.node(j, k)));
            }
        }
        RealField { grid, values }
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn integrate(&self) -> f64 {
        let w = self.grid.quad_weights();
        self.values.iter().zip(w).map(|(v, w)| v * w).sum()
    }
}

/// Fourier-in-angle, Chebyshev-in-radius interpolant of a [`ComplexField`].
///
/// Evaluation clamps the radial coordinate to the grid disc; callers that can
/// leave it (map inversion, compositions) must guard the radius themselves.
/// Mode slots and Chebyshev tails below the rounding floor of the field are
/// dropped at build time, which keeps pointwise evaluation cheap for
/// angularly band-limited data.
pub struct Interpolant {
    /// Active angular modes `(m, chebyshev coefficients)`.
    modes: Vec<(i64, Vec<Complex64>)>,
    radius: f64,
}

impl Interpolant {
    fn build(field: &ComplexField) -> Interpolant {
        let grid = field.grid();
        let n_r = grid.n_r();
        let n_theta = grid.n_theta();
        let n_full = 2 * n_r;
        let degree = n_full - 1;
        let modes_raw = crate::diff::to_modes(field);
        let v2c = grid.vals_to_cheb();
        let mut all: Vec<(i64, Vec<Complex64>)> = Vec::with_capacity(n_theta);
        let mut gmax = 0.0f64;
        for slot in 0..n_theta {
            let m = grid.mode_of_slot(slot);
            let sigma = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            // Double onto the full diameter with the mode's parity.
            let mut full = vec![Complex64::new(0.0, 0.0); n_full];
            for j in 0..n_r {
                let v = modes_raw[slot * n_r + j];
                full[j] = v;
                full[degree - j] = sigma * v;
            }
            let mut c = vec![Complex64::new(0.0, 0.0); n_full];
            for (k, ck) in c.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, fj) in full.iter().enumerate() {
                    acc += v2c[(k, j)] * fj;
                }
                *ck = acc;
                gmax = gmax.max(ck.norm());
            }
            all.push((m, c));
        }
        let floor = gmax * 1e-15;
        let mut modes = Vec::new();
        for (m, mut c) in all {
            let mut last = 0usize;
            for (k, v) in c.iter().enumerate() {
                if v.norm() > floor {
                    last = k + 1;
                }
            }
            if last == 0 {
                continue;
            }
            c.truncate(last);
            modes.push((m, c));
        }
        Interpolant {
            modes,
            radius: grid.radius(),
        }
    }

    /// Evaluates at the point `z` (radius clamped to the grid disc).
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        let theta = z.arg();
        let t = (r / self.radius).min(1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.modes {
            let g = clenshaw(c, t);
            acc += g * Complex64::from_polar(1.0, *m as f64 * theta);
        }
        acc
    }
}

/// Interpolation row helper shared with the quadrature machinery: values at
/// the positive rings -> value at radius-coordinate `t`, for parity `sigma`.
pub(crate) fn radial_interp_row(grid: &DiscGrid, t: f64, sigma: f64) -> Vec<f64> {
    let n_r = grid.n_r();
    let full = grid.t_full();
    let degree = full.len() - 1;
    let w = barycentric_weights(full.len());
    let row = barycentric_row(full, &w, t);
    (0..n_r).map(|j| row[j] + sigma * row[degree - j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn integrate_constant_is_area() {
        let g = make_grid(32, 64, 0.8).unwrap();
        let f = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        let v = f.integrate();
        assert!((v.re - PI * 0.64).abs() < 1e-10);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn integrate_z_vanishes() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| z);
        assert!(f.integrate().norm() < 1e-12);
    }

    #[test]
    fn integrate_is_linear() {
        let g = make_grid(16, 32, 0.7).unwrap();
        let f = ComplexField::from_fn(g.clone(), |z| z * z + Complex64::new(0.3, 0.1));
        let h = ComplexField::from_fn(g, |z| z.conj() - Complex64::new(0.0, 2.0));
        let lhs = f
            .scale(Complex64::new(2.0, 1.0))
            .add(&h.scale(Complex64::new(-0.5, 0.25)))
            .unwrap()
            .integrate();
        let rhs = Complex64::new(2.0, 1.0) * f.integrate()
            + Complex64::new(-0.5, 0.25) * h.integrate();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn interpolant_reproduces_smooth_field() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| (z * z).exp() + 0.5 * z.conj());
        let it = f.interpolant();
        for &(r, th) in &[(0.11, 0.3), (0.62, 2.0), (0.87, 4.4), (0.9, 5.9)] {
            let z = Complex64::from_polar(r, th);
            let want = (z * z).exp() + 0.5 * z.conj();
            assert!((it.eval(z) - want).norm() < 1e-9, "at {z}");
        }
    }

    #[test]
    fn grid_mismatch_detected() {
        let g1 = make_grid(16, 32, 0.7).unwrap();
        let g2 = make_grid(16, 32, 0.8).unwrap();
        let f1 = ComplexField::zeros(g1);
        let f2 = ComplexField::zeros(g2);
        assert!(f1.add(&f2).is_err());
    }
}
