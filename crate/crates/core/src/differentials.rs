//! Holomorphic quadratic differentials, harmonic Beltrami differentials and
//! the Weil-Petersson pairing.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::GeometryError;
use crate::field::ComplexField;
use crate::grid::DiscGrid;
use crate::hyperbolic;

/// Maximum polynomial degree for quadratic-differential and tangent data.
pub const MAX_DEGREE: usize = 8;

/// Holomorphic quadratic differential `Phi(z) dz^2` with polynomial
/// coefficient function `Phi(z) = sum c_k z^k`.
#[derive(Clone, Debug)]
pub struct QuadDifferential {
    coeffs: Vec<Complex64>,
}

impl QuadDifferential {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, GeometryError> {
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(GeometryError::InvalidParameter(format!(
                "degree {} exceeds cap {MAX_DEGREE}",
                coeffs.len().saturating_sub(1)
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "non-finite coefficient".into(),
            ));
        }
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Ok(QuadDifferential { coeffs })
    }

    pub fn zero() -> Self {
        QuadDifferential {
            coeffs: vec![Complex64::new(0.0, 0.0)],
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn sample(&self, grid: &Arc<DiscGrid>) -> ComplexField {
        ComplexField::from_fn(grid.clone(), |z| self.eval(z))
    }

    pub fn scale(&self, s: Complex64) -> QuadDifferential {
        QuadDifferential {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `A_2` norm against the hyperbolic weight: `(int |Phi|^2 e^{-psi})^{1/2}`.
    pub fn a2_norm(&self, grid: &Arc<DiscGrid>) -> f64 {
        let f = ComplexField::from_fn(grid.clone(), |z| {
            let v = self.eval(z);
            Complex64::new(v.norm_sqr() / hyperbolic::density_at(z), 0.0)
        });
        f.integrate().re.max(0.0).sqrt()
    }
}

/// Harmonic Beltrami differential `nu = e^{-psi} conj(q)` for a holomorphic
/// polynomial `q`; the model tangent vector of the Weil-Petersson space.
#[derive(Clone)]
pub struct TangentField {
    poly: Vec<Complex64>,
    field: ComplexField,
}

impl TangentField {
    pub fn new(grid: &Arc<DiscGrid>, poly: Vec<Complex64>) -> Result<Self, GeometryError> {
        if poly.len() > MAX_DEGREE + 1 {
            return Err(GeometryError::InvalidParameter(format!(
                "degree {} exceeds cap {MAX_DEGREE}",
                poly.len().saturating_sub(1)
            )));
        }
        let mut poly = poly;
        if poly.is_empty() {
            poly.push(Complex64::new(0.0, 0.0));
        }
        let p = poly.clone();
        let field = ComplexField::from_fn(grid.clone(), move |z| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &c in p.iter().rev() {
                acc = acc * z + c;
            }
            acc.conj() / hyperbolic::density_at(z)
        });
        Ok(TangentField { poly, field })
    }

    /// Monomial direction `q = z^k`.
    pub fn monomial(grid: &Arc<DiscGrid>, k: usize) -> Result<Self, GeometryError> {
        let mut poly = vec![Complex64::new(0.0, 0.0); k + 1];
        poly[k] = Complex64::new(1.0, 0.0);
        TangentField::new(grid, poly)
    }

    pub fn poly(&self) -> &[Complex64] {
        &self.poly
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.field.grid()
    }

    /// Closed-form evaluation anywhere in the open unit disc.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.poly.iter().rev() {
            acc = acc * z + c;
        }
        acc.conj() / hyperbolic::density_at(z)
    }

    pub fn scale(&self, s: Complex64) -> TangentField {
        // nu -> s nu corresponds to q -> conj(s) q.
        let poly: Vec<Complex64> = self.poly.iter().map(|c| c * s.conj()).collect();
        TangentField {
            poly,
            field: self.field.scale(s),
        }
    }

    pub fn add(&self, other: &TangentField) -> Result<TangentField, GeometryError> {
        if !DiscGrid::same_grid(self.field.grid(), other.field.grid()) {
            return Err(GeometryError::GridMismatch);
        }
        let n = self.poly.len().max(other.poly.len());
        let mut poly = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in poly.iter_mut().enumerate() {
            if k < self.poly.len() {
                *c += self.poly[k];
            }
            if k < other.poly.len() {
                *c += other.poly[k];
            }
        }
        Ok(TangentField {
            poly,
            field: self.field.add(&other.field)?,
        })
    }

    /// Nodewise defect of the harmonic representation
    /// `|field - e^{-psi} conj(q)|`; zero by construction, kept as a check.
    pub fn representation_defect(&self) -> f64 {
        let g = self.field.grid();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let z = g.node(j, k);
                worst = worst.max((self.field.values()[g.idx(j, k)] - self.eval(z)).norm());
            }
        }
        worst
    }
}

/// Weil-Petersson pairing `<u, v> = int u conj(v) e^psi d^2 z`.
pub fn wp_inner(u: &TangentField, v: &TangentField) -> Result<Complex64, GeometryError> {
    if !DiscGrid::same_grid(u.field.grid(), v.field.grid()) {
        return Err(GeometryError::GridMismatch);
    }
    let grid = u.field.grid();
    let integrand = u.field.zip_with(&v.field, |a, b| a * b.conj())?;
    let weighted = ComplexField::from_fn(grid.clone(), |z| {
        Complex64::new(hyperbolic::density_at(z), 0.0)
    })
    .mul(&integrand)?;
    Ok(weighted.integrate())
}

/// Same pairing for raw complex fields (used with pulled-back directions).
pub fn wp_inner_fields(u: &ComplexField, v: &ComplexField) -> Result<Complex64, GeometryError> {
    let integrand = u.zip_with(v, |a, b| a * b.conj())?;
    let weighted = ComplexField::from_fn(u.grid().clone(), |z| {
        Complex64::new(hyperbolic::density_at(z), 0.0)
    })
    .mul(&integrand)?;
    Ok(weighted.integrate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn wp_norm_of_unit_tangent_approaches_pi_over_12() {
        let g = make_grid(64, 128, 0.99).unwrap();
        let u = TangentField::monomial(&g, 0).unwrap();
        let v = wp_inner(&u, &u).unwrap();
        assert!(v.im.abs() < 1e-12);
        let rel = (v.re - PI / 12.0).abs() / (PI / 12.0);
        assert!(rel < 2e-2, "pi/12 rel err {rel}");
    }

    #[test]
    fn truncated_weighted_mass_converges_to_pi_over_12() {
        // integral |q|^2 e^{-psi} with q = 1, R -> 1.
        let mut prev_err = f64::INFINITY;
        for r in [0.9, 0.95, 0.99] {
            let g = make_grid(48, 64, r).unwrap();
            let f = ComplexField::from_fn(g, |z| {
                Complex64::new(1.0 / hyperbolic::density_at(z), 0.0)
            });
            let err = (f.integrate().re - PI / 12.0).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-4);
    }

    #[test]
    fn monomials_are_wp_orthogonal() {
        let g = make_grid(32, 64, 0.9).unwrap();
        for j in 0..4usize {
            for k in 0..4usize {
                if j == k {
                    continue;
                }
                let u = TangentField::monomial(&g, j).unwrap();
                let v = TangentField::monomial(&g, k).unwrap();
                assert!(wp_inner(&u, &v).unwrap().norm() < 1e-10);
            }
        }
    }

    #[test]
    fn wp_inner_is_hermitian() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let u = TangentField::new(
            &g,
            vec![Complex64::new(0.3, 0.1), Complex64::new(0.0, -0.2)],
        )
        .unwrap();
        let v = TangentField::new(
            &g,
            vec![
                Complex64::new(-0.1, 0.4),
                Complex64::new(0.2, 0.0),
                Complex64::new(0.0, 0.05),
            ],
        )
        .unwrap();
        let a = wp_inner(&u, &v).unwrap();
        let b = wp_inner(&v, &u).unwrap();
        assert_eq!(a, b.conj());
    }

    #[test]
    fn tangent_representation_is_exact() {
        let g = make_grid(16, 32, 0.8).unwrap();
        let u = TangentField::new(
            &g,
            vec![Complex64::new(1.0, 0.5), Complex64::new(0.0, 1.0)],
        )
        .unwrap();
        assert!(u.representation_defect() < 1e-12);
    }

    #[test]
    fn quad_differential_degree_cap() {
        let too_big = vec![Complex64::new(1.0, 0.0); MAX_DEGREE + 2];
        assert!(QuadDifferential::new(too_big).is_err());
    }
}
