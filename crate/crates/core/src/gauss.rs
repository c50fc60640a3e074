//! The Gauss equation `2 phi_{z zbar} = e^phi - e^{-phi} |Phi|^2` for the
//! conformal factor of a maximal disc with Hopf data `Phi`.
//!
//! The solve works in the difference `u = phi - psi`, which absorbs the
//! hyperbolic background (`2 psi_{z zbar} = e^psi` analytically):
//!
//! ```text
//! Res(u) = Delta u / 2 - e^psi (e^u - 1) + e^{-psi-u} |Phi|^2,   u(R) = 0.
//! ```
//!
//! Newton's linearization `Delta/2 - (e^{psi+u} + e^{-psi-u}|Phi|^2)` is
//! strictly negative definite, so every step is solvable; the inner linear
//! systems are solved by BiCGstab preconditioned with the per-angular-mode
//! radial factorization of the dominant radial part.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::diff::{laplacian, laplacian_mode_matrix};
use crate::differentials::QuadDifferential;
use crate::error::{GaussError, GeometryError};
use crate::field::{ComplexField, RealField};
use crate::grid::DiscGrid;
use crate::hyperbolic;

const NEWTON_MAX_ITERS: usize = 50;
const LINE_SEARCH_MAX_HALVINGS: usize = 20;
const BICGSTAB_MAX_ITERS: usize = 400;

/// Solved conformal factor `e^phi |dz|^2`.
pub struct ConformalFactor {
    phi: RealField,
    u: RealField,
    residual_sup: f64,
    residual_direct: f64,
    newton_iterations: usize,
    u_interp: crate::field::Interpolant,
}

impl ConformalFactor {
    pub fn phi(&self) -> &RealField {
        &self.phi
    }

    /// `u = phi - psi >= 0`.
    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.phi.grid()
    }

    /// Sup residual of the `u`-form equation at acceptance.
    pub fn residual_sup(&self) -> f64 {
        self.residual_sup
    }

    /// Direct-substitution residual `sup |2 phi_{z zbar} - e^phi + e^{-phi}|Phi|^2|`
    /// measured with the grid operators (discretization-limited).
    pub fn residual_direct(&self) -> f64 {
        self.residual_direct
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    /// `min u`; nonnegative up to solver tolerance (`e^phi >= e^psi`).
    pub fn metric_lower_bound_margin(&self) -> f64 {
        self.u.min()
    }

    /// `phi` off the grid: `psi(z) + u(z)` with `u` extended by zero beyond
    /// the truncation radius.
    pub fn phi_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let u = if r <= self.grid().radius() {
            self.u_interp.eval(z).re
        } else {
            0.0
        };
        hyperbolic::psi_at(z) + u
    }

    /// `e^{-phi}` off the grid.
    pub fn exp_neg_phi_at(&self, z: Complex64) -> f64 {
        (-self.phi_at(z)).exp()
    }
}

/// Gaussian curvature `K_phi = -2 phi_{z zbar} e^{-phi}` of the solved metric.
pub fn curvature(phi: &ConformalFactor) -> RealField {
    let grid = phi.grid().clone();
    let lap = laplacian(&phi.phi.to_complex());
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        values.push(-0.5 * lap.values()[i].re * (-phi.phi.values()[i]).exp());
    }
    RealField::new(grid, values).expect("layout matches")
}

/// Newton solve of the Gauss equation with Dirichlet data `phi = psi` at the
/// truncation ring.
pub fn solve_gauss(
    quad: &QuadDifferential,
    grid: &Arc<DiscGrid>,
    tol: f64,
) -> Result<ConformalFactor, GaussError> {
    if tol <= 0.0 {
        return Err(GaussError::Geometry(GeometryError::InvalidParameter(
            "tol must be positive".into(),
        )));
    }
    let n = grid.len();
    let n_theta = grid.n_theta();
    let psi = hyperbolic::psi_field(grid);
    let e_psi = psi.map(f64::exp);
    let phi_sq = {
        let s = quad.sample(grid);
        s.values().iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()
    };

    let residual_of = |u: &[f64]| -> Vec<f64> {
        let uf = ComplexField::new(
            grid.clone(),
            u.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
        .expect("layout");
        let lap = laplacian(&uf);
        let mut res = vec![0.0; n];
        for i in 0..n {
            res[i] = 0.5 * lap.values()[i].re - e_psi.values()[i] * (u[i].exp() - 1.0)
                + (-psi.values()[i] - u[i]).exp() * phi_sq[i];
        }
        for k in 0..n_theta {
            res[k] = u[k]; // Dirichlet ring r = R
        }
        res
    };

    let mut u = vec![0.0; n];
    let mut res = residual_of(&u);
    let mut res_sup = sup(&res);
    let mut newton_iterations = 0;

    while res_sup > tol {
        newton_iterations += 1;
        if newton_iterations > NEWTON_MAX_ITERS {
            return Err(GaussError::NewtonDivergence {
                last_residual: res_sup,
            });
        }
        // c = e^{psi+u} + e^{-psi-u} |Phi|^2 > 0.
        let c: Vec<f64> = (0..n)
            .map(|i| {
                (psi.values()[i] + u[i]).exp()
                    + (-psi.values()[i] - u[i]).exp() * phi_sq[i]
            })
            .collect();
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        // Inexact Newton: early steps only need a fraction of the current
        // residual; the floor keeps the final solve above rounding noise.
        let lin_tol = (0.01 * tol).max(1e-3 * res_sup).max(1e-12);
        let delta = solve_linear(grid, &c, &rhs, lin_tol)?;

        // Damped update: halve on residual increase.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_MAX_HALVINGS {
            let trial: Vec<f64> = u
                .iter()
                .zip(&delta)
                .map(|(&a, &d)| a + step * d)
                .collect();
            let trial_res = residual_of(&trial);
            let trial_sup = sup(&trial_res);
            if trial_sup < res_sup || trial_sup <= tol {
                u = trial;
                res = trial_res;
                res_sup = trial_sup;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(GaussError::NewtonDivergence {
                last_residual: res_sup,
            });
        }
    }

    let u_field = RealField::new(grid.clone(), u.clone()).map_err(GaussError::Geometry)?;
    let phi = RealField::new(
        grid.clone(),
        psi.values()
            .iter()
            .zip(&u)
            .map(|(&p, &uu)| p + uu)
            .collect(),
    )
    .map_err(GaussError::Geometry)?;

    // Direct substitution through the grid operators.
    let lap_phi = laplacian(&phi.to_complex());
    let mut residual_direct = 0.0f64;
    for i in 0..n {
        let r = 0.5 * lap_phi.values()[i].re - phi.values()[i].exp()
            + (-phi.values()[i]).exp() * phi_sq[i];
        residual_direct = residual_direct.max(r.abs());
    }

    let u_interp = u_field.to_complex().interpolant();
    Ok(ConformalFactor {
        phi,
        u: u_field,
        residual_sup: res_sup,
        residual_direct,
        newton_iterations,
        u_interp,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Applies `A = Delta/2 - c` with an identity row on the Dirichlet ring.
fn apply_operator(grid: &Arc<DiscGrid>, c: &[f64], v: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let vf = ComplexField::new(
        grid.clone(),
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
    )
    .expect("layout");
    let lap = laplacian(&vf);
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = 0.5 * lap.values()[i].re - c[i] * v[i];
    }
    for k in 0..grid.n_theta() {
        out[k] = v[k];
    }
    out
}

struct ModePreconditioner {
    lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ModePreconditioner {
    fn build(grid: &Arc<DiscGrid>, c: &[f64]) -> ModePreconditioner {
        let n_r = grid.n_r();
        let n_theta = grid.n_theta();
        // Angular mean of c per ring.
        let mut c0 = vec![0.0; n_r];
        for (j, cj) in c0.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n_theta {
                acc += c[grid.idx(j, k)];
            }
            *cj = acc / n_theta as f64;
        }
        let mut lus = Vec::with_capacity(n_theta / 2 + 1);
        for m in 0..=(n_theta / 2) {
            let lm = laplacian_mode_matrix(grid, m as i64);
            let mut a = DMatrix::zeros(n_r, n_r);
            for i in 0..n_r {
                for j in 0..n_r {
                    a[(i, j)] = 0.5 * lm[(i, j)];
                }
                a[(i, i)] -= c0[i];
            }
            for j in 0..n_r {
                a[(0, j)] = if j == 0 { 1.0 } else { 0.0 };
            }
            lus.push(a.lu());
        }
        ModePreconditioner { lus }
    }

    fn apply(&self, grid: &Arc<DiscGrid>, v: &[f64]) -> Vec<f64> {
        let n_r = grid.n_r();
        let n_theta = grid.n_theta();
        let vf = ComplexField::new(
            grid.clone(),
            v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
        .expect("layout");
        let modes = crate::diff::to_modes(&vf);
        let mut out_modes = vec![Complex64::new(0.0, 0.0); modes.len()];
        for slot in 0..n_theta {
            let m = grid.mode_of_slot(slot).unsigned_abs() as usize;
            if slot == n_theta / 2 {
                continue;
            }
            let profile = &modes[slot * n_r..(slot + 1) * n_r];
            let mut re = DVector::from_fn(n_r, |i, _| profile[i].re);
            let mut im = DVector::from_fn(n_r, |i, _| profile[i].im);
            let lu = &self.lus[m];
            if !lu.solve_mut(&mut re) || !lu.solve_mut(&mut im) {
                // Singular preconditioner block: fall through with identity.
                for i in 0..n_r {
                    out_modes[slot * n_r + i] = profile[i];
                }
                continue;
            }
            for i in 0..n_r {
                out_modes[slot * n_r + i] = Complex64::new(re[i], im[i]);
            }
        }
        let out = crate::diff::from_modes(grid, &out_modes);
        out.values().iter().map(|v| v.re).collect()
    }
}

/// Left-preconditioned BiCGstab on `A delta = rhs`; exits on the true
/// (unpreconditioned) sup residual.
fn solve_linear(
    grid: &Arc<DiscGrid>,
    c: &[f64],
    rhs: &[f64],
    tol: f64,
) -> Result<Vec<f64>, GaussError> {
    let n = rhs.len();
    let precond = ModePreconditioner::build(grid, c);
    let op = |v: &[f64]| -> Vec<f64> { precond.apply(grid, &apply_operator(grid, c, v)) };
    let b: Vec<f64> = precond.apply(grid, rhs);

    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.clone();
    let r0 = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    for iter in 0..BICGSTAB_MAX_ITERS {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = op(&p);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        let t = op(&s);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if iter % 4 == 3 || sup(&r) < tol {
            let true_res = {
                let ax = apply_operator(grid, c, &x);
                let mut worst = 0.0f64;
                for i in 0..n {
                    worst = worst.max((rhs[i] - ax[i]).abs());
                }
                worst
            };
            if true_res <= tol {
                return Ok(x);
            }
        }
    }
    let ax = apply_operator(grid, c, &x);
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((rhs[i] - ax[i]).abs());
    }
    if worst <= tol * 10.0 {
        Ok(x)
    } else {
        Err(GaussError::LinearSolveFailure {
            relative: worst / sup(rhs).max(1e-300),
        })
    }
}
