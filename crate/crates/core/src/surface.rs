//! Induced Gauss maps of a maximal disc: the pair of harmonic maps with
//! Beltrami coefficients `+- conj(Phi) e^{-phi}` and Hopf differentials
//! `+- Phi`, together with the energy functionals.
//!
//! The maps are produced by the Beltrami solver rather than by integrating
//! the harmonic-map equation: with `phi` solving the Gauss equation, the
//! coefficient determines the harmonic map, and harmonicity becomes a
//! residual check on the solved map.

use crate::beltrami::{solve_beltrami, BeltramiCoefficient, Normalization, QCMap};
use crate::diff::d_zbar;
use crate::differentials::QuadDifferential;
use crate::error::SurfaceError;
use crate::field::ComplexField;
use crate::gauss::ConformalFactor;
use crate::hyperbolic;

/// Which of the two induced maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The solved pair `(F_+, F_-)` with its generating data.
pub struct InducedGaussPair {
    f_plus: QCMap,
    f_minus: QCMap,
    mu_plus: BeltramiCoefficient,
    mu_minus: BeltramiCoefficient,
    phi: ConformalFactor,
    quad: QuadDifferential,
}

impl InducedGaussPair {
    pub fn f_plus(&self) -> &QCMap {
        &self.f_plus
    }

    pub fn f_minus(&self) -> &QCMap {
        &self.f_minus
    }

    pub fn f(&self, sign: Sign) -> &QCMap {
        match sign {
            Sign::Plus => &self.f_plus,
            Sign::Minus => &self.f_minus,
        }
    }

    pub fn mu_plus(&self) -> &BeltramiCoefficient {
        &self.mu_plus
    }

    pub fn mu_minus(&self) -> &BeltramiCoefficient {
        &self.mu_minus
    }

    pub fn phi(&self) -> &ConformalFactor {
        &self.phi
    }

    pub fn quad(&self) -> &QuadDifferential {
        &self.quad
    }

    pub fn grid(&self) -> &std::sync::Arc<crate::grid::DiscGrid> {
        self.phi.grid()
    }
}

/// `mu_{F_sign} = sign * conj(Phi) e^{-phi}`, sampled on the grid.
pub fn beltrami_of_f(
    phi: &ConformalFactor,
    quad: &QuadDifferential,
    sign: Sign,
) -> Result<BeltramiCoefficient, SurfaceError> {
    let grid = phi.grid().clone();
    let s = sign.factor();
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            values.push(s * quad.eval(z).conj() * (-phi.phi().values()[i]).exp());
        }
    }
    let field = ComplexField::new(grid, values).map_err(SurfaceError::Geometry)?;
    let sup = field.sup_norm();
    if sup >= 1.0 {
        return Err(SurfaceError::NormViolation { sup });
    }
    BeltramiCoefficient::new(field).map_err(SurfaceError::Geometry)
}

/// Solves both induced maps, three-point normalized.
///
/// The coefficient `+- conj(Phi) e^{-phi}` is known in closed form past the
/// base truncation ring (`phi -> psi` there), so the actual Beltrami solves
/// run on an enlarged grid: the zero-extension seam moves outward to where
/// the coefficient has decayed further, and the base-grid fields of the
/// returned maps are smooth restrictions.
pub fn build_pair(
    phi: ConformalFactor,
    quad: QuadDifferential,
    tol: f64,
) -> Result<InducedGaussPair, SurfaceError> {
    let mu_plus = beltrami_of_f(&phi, &quad, Sign::Plus)?;
    let mu_minus = beltrami_of_f(&phi, &quad, Sign::Minus)?;
    let f_plus = solve_induced_map(&phi, &quad, Sign::Plus, &mu_plus, tol)?;
    let f_minus = solve_induced_map(&phi, &quad, Sign::Minus, &mu_minus, tol)?;
    Ok(InducedGaussPair {
        f_plus,
        f_minus,
        mu_plus,
        mu_minus,
        phi,
        quad,
    })
}

fn solve_induced_map(
    phi: &ConformalFactor,
    quad: &QuadDifferential,
    sign: Sign,
    mu_base: &BeltramiCoefficient,
    tol: f64,
) -> Result<QCMap, SurfaceError> {
    let base = phi.grid().clone();
    let r = base.radius();
    let r_ext = r + 0.75 * (1.0 - r);
    let ext = crate::grid::cached_grid(base.n_r() + 16, base.n_theta(), r_ext)
        .map_err(SurfaceError::Geometry)?;
    let s = sign.factor();
    let field = ComplexField::from_fn(ext, |z| {
        s * quad.eval(z).conj() * phi.exp_neg_phi_at(z)
    });
    let sup = field.sup_norm();
    if sup >= 1.0 {
        return Err(SurfaceError::NormViolation { sup });
    }
    let mu_ext = BeltramiCoefficient::new(field).map_err(SurfaceError::Geometry)?;
    let w_ext = solve_beltrami(&mu_ext, Normalization::FixThreePoints, tol)?;
    w_ext
        .resample_onto(&base, mu_base.clone())
        .map_err(SurfaceError::Solve)
}

/// Hopf differential `e^{psi . F} F_z conj(F)_z` of a solved map; the target
/// density is evaluated in closed form at the mapped points.
pub fn hopf_differential(f: &QCMap) -> ComplexField {
    let grid = f.grid().clone();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let w = f.values().values()[i];
        let dens = hyperbolic::density_at(w);
        values.push(dens * f.wz().values()[i] * f.wzb().values()[i].conj());
    }
    ComplexField::new(grid, values).expect("layout matches")
}

/// Sup-relative residual of the harmonic-map equation
/// `F_{z zbar} + (psi_w . F) F_z F_zbar = 0`.
pub fn harmonic_residual(f: &QCMap) -> f64 {
    let grid = f.grid();
    let f_zzb = d_zbar(f.wz());
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..grid.len() {
        let w = f.values().values()[i];
        let coupling = hyperbolic::psi_w_at(w) * f.wz().values()[i] * f.wzb().values()[i];
        let res = f_zzb.values()[i] + coupling;
        num = num.max(res.norm());
        den = den.max(f_zzb.values()[i].norm().max(coupling.norm()));
    }
    num / den.max(1e-300)
}

/// Anti-holomorphic energy `int |Phi|^2 e^{-phi} d^2 z`.
pub fn anti_holomorphic_energy(phi: &ConformalFactor, quad: &QuadDifferential) -> f64 {
    let grid = phi.grid();
    let mut acc = 0.0;
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            acc += quad.eval(z).norm_sqr() * (-phi.phi().values()[i]).exp()
                * grid.quad_weights()[i];
        }
    }
    acc
}

/// Total curvature `int kappa^2 e^phi d^2 z = int |mu_F|^2 e^phi d^2 z`;
/// algebraically the same integral as [`anti_holomorphic_energy`].
pub fn total_curvature_integral(phi: &ConformalFactor, quad: &QuadDifferential) -> f64 {
    let grid = phi.grid();
    let mut acc = 0.0;
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let p = phi.phi().values()[i];
            let mu_sq = quad.eval(z).norm_sqr() * (-2.0 * p).exp();
            acc += mu_sq * p.exp() * grid.quad_weights()[i];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{curvature, solve_gauss};
    use num_complex::Complex64;
    use crate::grid::{make_grid, DiscGrid};
    use std::sync::{Arc, OnceLock};

    fn grid() -> Arc<DiscGrid> {
        static GRID: OnceLock<Arc<DiscGrid>> = OnceLock::new();
        GRID.get_or_init(|| make_grid(64, 128, 0.9).unwrap()).clone()
    }

    fn test_quad() -> QuadDifferential {
        QuadDifferential::new(vec![Complex64::new(0.1, 0.0), Complex64::new(0.05, 0.02)])
            .unwrap()
    }

    fn pair() -> &'static InducedGaussPair {
        static PAIR: OnceLock<InducedGaussPair> = OnceLock::new();
        PAIR.get_or_init(|| {
            let phi = solve_gauss(&test_quad(), &grid(), 1e-11).unwrap();
            build_pair(phi, test_quad(), 1e-10).unwrap()
        })
    }

    #[test]
    fn zero_data_gives_identity_maps() {
        let phi = solve_gauss(&QuadDifferential::zero(), &grid(), 1e-10).unwrap();
        let p = build_pair(phi, QuadDifferential::zero(), 1e-10).unwrap();
        let g = grid();
        for j in [0usize, 20, 63] {
            for k in [0usize, 31, 101] {
                let z = g.node(j, k);
                assert!((p.f_plus().values().values()[g.idx(j, k)] - z).norm() < 1e-12);
                assert!((p.f_minus().values().values()[g.idx(j, k)] - z).norm() < 1e-12);
            }
        }
        assert_eq!(anti_holomorphic_energy(p.phi(), p.quad()), 0.0);
    }

    #[test]
    fn coefficients_are_exact_and_antisymmetric() {
        let p = pair();
        let g = grid();
        for i in 0..g.len() {
            let a = p.mu_plus().field().values()[i];
            let b = p.mu_minus().field().values()[i];
            assert_eq!(a, -b);
        }
        // |mu_F| = sqrt(K + 1) within 1e-6.
        let k = curvature(p.phi());
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            let lhs = p.mu_plus().field().values()[i].norm_sqr();
            worst = worst.max((lhs - (k.values()[i] + 1.0)).abs());
        }
        assert!(worst < 1e-6, "mu vs curvature {worst}");
    }

    #[test]
    fn hopf_of_identity_vanishes() {
        let phi = solve_gauss(&QuadDifferential::zero(), &grid(), 1e-10).unwrap();
        let p = build_pair(phi, QuadDifferential::zero(), 1e-10).unwrap();
        let h = hopf_differential(p.f_plus());
        assert!(h.sup_norm() < 1e-12);
    }

    #[test]
    fn hopf_recovers_quadratic_differential() {
        let p = pair();
        let g = grid();
        let h = hopf_differential(p.f_plus());
        // Relative L^2(e^{-phi}) distance to +Phi.
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let z = g.node(j, k);
                let w = g.quad_weights()[i] * (-p.phi().phi().values()[i]).exp();
                num += (h.values()[i] - p.quad().eval(z)).norm_sqr() * w;
                den += p.quad().eval(z).norm_sqr() * w;
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-3, "hopf recovery rel {rel}");
    }

    #[test]
    fn hopf_pair_is_antisymmetric() {
        let p = pair();
        let hp = hopf_differential(p.f_plus());
        let hm = hopf_differential(p.f_minus());
        let rel = hp.add(&hm).unwrap().sup_norm() / hp.sup_norm();
        assert!(rel < 2e-3, "hopf antisymmetry {rel}");
    }

    #[test]
    fn hopf_is_nearly_holomorphic() {
        let p = pair();
        let h = hopf_differential(p.f_plus());
        let dh = d_zbar(&h);
        // Sup over an interior band, relative to the Hopf scale: the
        // zero-extension seam at the truncation ring is not holomorphic.
        let g = grid();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            if g.r_nodes()[j] > 0.85 * g.radius() {
                continue;
            }
            for k in 0..g.n_theta() {
                worst = worst.max(dh.values()[g.idx(j, k)].norm());
            }
        }
        let rel = worst / h.sup_norm();
        assert!(rel < 1e-3, "dbar hopf rel {rel}");
    }

    #[test]
    fn maps_are_harmonic() {
        let p = pair();
        let res = harmonic_residual(p.f_plus());
        assert!(res < 1e-4, "harmonic residual {res}");
        let res_m = harmonic_residual(p.f_minus());
        assert!(res_m < 1e-4, "harmonic residual (minus) {res_m}");
    }

    #[test]
    fn energy_density_identity() {
        // e^phi = e^{psi . F} |F_z|^2 within 2e-3 relative.
        let p = pair();
        let g = grid();
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            let w = p.f_plus().values().values()[i];
            let lhs = p.phi().phi().values()[i].exp();
            let rhs = hyperbolic::density_at(w) * p.f_plus().wz().values()[i].norm_sqr();
            worst = worst.max((lhs - rhs).abs() / lhs);
        }
        assert!(worst < 2e-3, "energy density identity {worst}");
    }

    #[test]
    fn energy_equals_total_curvature() {
        let p = pair();
        let e = anti_holomorphic_energy(p.phi(), p.quad());
        let t = total_curvature_integral(p.phi(), p.quad());
        assert!(e > 0.0);
        assert!((e - t).abs() < 1e-12 * e.max(1.0), "{e} vs {t}");
        // Nodewise integrand identity.
        let g = grid();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let z = g.node(j, k);
                let ph = p.phi().phi().values()[i];
                let a = p.quad().eval(z).norm_sqr() * (-ph).exp();
                let b = ph.exp() * p.mu_plus().field().values()[i].norm_sqr();
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-10, "integrand identity {worst}");
    }

    #[test]
    fn energy_is_phase_invariant() {
        let g = grid();
        let quad = test_quad();
        let rotated = quad.scale(Complex64::from_polar(1.0, 1.234));
        let e1 = {
            let phi = solve_gauss(&quad, &g, 1e-11).unwrap();
            anti_holomorphic_energy(&phi, &quad)
        };
        let e2 = {
            let phi = solve_gauss(&rotated, &g, 1e-11).unwrap();
            anti_holomorphic_energy(&phi, &rotated)
        };
        assert!((e1 - e2).abs() < 1e-8 * e1, "{e1} vs {e2}");
    }

    #[test]
    fn energy_cauchy_converges_in_radius() {
        let quad = QuadDifferential::new(vec![Complex64::new(0.1, 0.0)]).unwrap();
        let mut values = Vec::new();
        for r in [0.8, 0.9, 0.95] {
            let g = make_grid(48, 64, r).unwrap();
            let phi = solve_gauss(&quad, &g, 1e-11).unwrap();
            values.push(anti_holomorphic_energy(&phi, &quad));
        }
        let d1 = (values[1] - values[0]).abs();
        let d2 = (values[2] - values[1]).abs();
        assert!(d2 < 0.5 * d1, "differences {d1} -> {d2}");
    }
}
