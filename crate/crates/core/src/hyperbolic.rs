//! Hyperbolic metric data on the unit disc.
//!
//! The Poincare density is `e^psi = 4 / (1 - |z|^2)^2`; it solves the
//! Liouville equation `psi_{z zbar} = e^psi / 2` and has curvature -1.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::RealField;
use crate::grid::DiscGrid;

/// `e^psi(z)` for a point of the open unit disc.
#[inline]
pub fn density_at(z: Complex64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0 / (s * s)
}

/// `psi(z) = log 4 - 2 log(1 - |z|^2)`.
#[inline]
pub fn psi_at(z: Complex64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0f64.ln() - 2.0 * s.ln()
}

/// `psi_w = 2 wbar / (1 - |w|^2)`, the metric's holomorphic log-derivative.
#[inline]
pub fn psi_w_at(w: Complex64) -> Complex64 {
    2.0 * w.conj() / (1.0 - w.norm_sqr())
}

/// Hyperbolic density sampled on the grid; computed per ring so rotation
/// invariance holds nodewise exactly.
pub fn hyperbolic_density(grid: &Arc<DiscGrid>) -> RealField {
    let mut values = Vec::with_capacity(grid.len());
    for &r in grid.r_nodes() {
        let s = 1.0 - r * r;
        let v = 4.0 / (s * s);
        values.extend(std::iter::repeat_n(v, grid.n_theta()));
    }
    RealField::new(grid.clone(), values).expect("ring layout matches grid")
}

/// `psi` sampled on the grid, ring-based like [`hyperbolic_density`].
pub fn psi_field(grid: &Arc<DiscGrid>) -> RealField {
    let mut values = Vec::with_capacity(grid.len());
    for &r in grid.r_nodes() {
        let v = 4.0f64.ln() - 2.0 * (1.0 - r * r).ln();
        values.extend(std::iter::repeat_n(v, grid.n_theta()));
    }
    RealField::new(grid.clone(), values).expect("ring layout matches grid")
}

/// Hyperbolic density of the exterior disc `|z| > 1`:
/// `e^{psi*} = 4 / (|z|^2 - 1)^2`.
#[inline]
pub fn exterior_density_at(z: Complex64) -> f64 {
    let s = z.norm_sqr() - 1.0;
    4.0 / (s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::laplacian;
    use crate::grid::make_grid;

    #[test]
    fn density_closed_form_values() {
        assert!((density_at(Complex64::new(0.0, 0.0)) - 4.0).abs() < 1e-15);
        let v = density_at(Complex64::new(0.5, 0.0));
        assert!((v - 4.0 / (0.75 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn density_rotation_invariant_nodewise() {
        let g = make_grid(16, 32, 0.9).unwrap();
        let d = hyperbolic_density(&g);
        for j in 0..g.n_r() {
            let first = d.values()[g.idx(j, 0)];
            for k in 1..g.n_theta() {
                assert_eq!(d.values()[g.idx(j, k)], first);
            }
        }
    }

    #[test]
    fn discrete_liouville_residual() {
        // psi_{z zbar} - e^psi / 2 == Delta psi / 4 - e^psi / 2 -> 0.
        let g = make_grid(64, 128, 0.9).unwrap();
        let psi = psi_field(&g).to_complex();
        let lap = laplacian(&psi);
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let z = g.node(j, k);
                let res = 0.25 * lap.values()[g.idx(j, k)].re - 0.5 * density_at(z);
                worst = worst.max(res.abs());
            }
        }
        assert!(worst < 1e-6, "Liouville residual {worst}");
    }
}
