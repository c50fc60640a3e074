//! Cauchy and Beurling transforms of disc-supported densities, reduced to
//! per-angular-mode radial Volterra operators.
//!
//! For `f = sum_m f_m(rho) e^{i m alpha}` supported on `rho <= R`, expanding
//! the Cauchy kernel in the two regions `rho > r`, `rho < r` gives
//!
//! ```text
//! (P f)_m(r) = -2 int_r^R f_{m+1}(rho) (r/rho)^m drho            (m >= 0)
//! (P f)_m(r) =  2 int_0^r f_{m+1}(rho) (rho/r)^{-m} drho         (m <= -1)
//! (T f)_m(r) = f_{m+2}(r) - 2(m+1) int_r^R f_{m+2} (r/rho)^m drho/rho   (m >= -1)
//! (T f)_m(r) = f_{m+2}(r) + 2(m+1) int_0^r f_{m+2} (rho/r)^{-m-1} drho/r (m <= -2)
//! ```
//!
//! so `d_zbar(P f) = f` on the disc and `T = d_z P`.  All kernels are kept in
//! ratio form (powers of `r/rho <= 1`), which stays stable for high modes.
//! Outside the support `P f` is the Laurent tail `sum a_n z^{-n-1}` with
//! `a_n = 2 int_0^R f_{-n} rho^{n+1} drho`.
//!
//! The radial integrals are evaluated by per-panel Gauss-Legendre quadrature
//! against the parity-folded Chebyshev cardinal functions, precomputed once
//! per grid as dense node-to-node matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::field::{radial_interp_row, ComplexField};
use crate::grid::{gauss_legendre, DiscGrid};

const PANEL_Q: usize = 12;

pub(crate) struct CauchyWorkspace {
    n_r: usize,
    n_theta: usize,
    /// Beurling matrices indexed by `m + M`, valid for `m` in `[-M+1, M-3]`.
    t_mats: Vec<Option<DMatrix<f64>>>,
    /// Cauchy matrices indexed by `m + M`, valid for `m` in `[-M+1, M-2]`.
    p_mats: Vec<Option<DMatrix<f64>>>,
    /// Rows producing the exterior Laurent coefficients `a_n`.
    laurent_rows: Vec<Vec<f64>>,
    /// Row producing `(P f)_0(0)` from the mode `+1` profile.
    p0_row: Vec<f64>,
    /// Row producing `(T f)_0(0)` from the mode `+2` profile.
    t0_row: Vec<f64>,
}

struct Panels {
    /// Quadrature abscissae per panel, ascending radius.
    rho: Vec<Vec<f64>>,
    /// Matching weights.
    w: Vec<Vec<f64>>,
    /// Folded interpolation rows at each abscissa, per parity.
    rows_even: Vec<Vec<Vec<f64>>>,
    rows_odd: Vec<Vec<Vec<f64>>>,
}

impl CauchyWorkspace {
    pub fn build(grid: &DiscGrid) -> CauchyWorkspace {
        let n_r = grid.n_r();
        let n_theta = grid.n_theta();
        let m_half = n_theta as i64 / 2;
        let radius = grid.radius();

        // Ascending panel boundaries: 0, r_min, ..., R.
        let mut bounds = vec![0.0];
        bounds.extend(grid.r_nodes().iter().rev().copied());
        let n_panels = bounds.len() - 1;
        let (gl_x, gl_w) = gauss_legendre(PANEL_Q);

        let mut panels = Panels {
            rho: Vec::with_capacity(n_panels),
            w: Vec::with_capacity(n_panels),
            rows_even: Vec::with_capacity(n_panels),
            rows_odd: Vec::with_capacity(n_panels),
        };
        for p in 0..n_panels {
            let (a, b) = (bounds[p], bounds[p + 1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut rho = Vec::with_capacity(PANEL_Q);
            let mut w = Vec::with_capacity(PANEL_Q);
            let mut re = Vec::with_capacity(PANEL_Q);
            let mut ro = Vec::with_capacity(PANEL_Q);
            for q in 0..PANEL_Q {
                let x = mid + half * gl_x[q];
                rho.push(x);
                w.push(half * gl_w[q]);
                re.push(radial_interp_row(grid, x / radius, 1.0));
                ro.push(radial_interp_row(grid, x / radius, -1.0));
            }
            panels.rho.push(rho);
            panels.w.push(w);
            panels.rows_even.push(re);
            panels.rows_odd.push(ro);
        }

        // Ascending index of each (descending) grid ring.
        let asc_of = |i: usize| n_r - 1 - i;

        let slots = (2 * m_half + 1) as usize;
        let mut t_mats: Vec<Option<DMatrix<f64>>> = (0..slots).map(|_| None).collect();
        let mut p_mats: Vec<Option<DMatrix<f64>>> = (0..slots).map(|_| None).collect();

        for m in (-m_half + 1)..=(m_half - 3) {
            t_mats[(m + m_half) as usize] = Some(build_t_matrix(grid, &panels, m, asc_of));
        }
        for m in (-m_half + 1)..=(m_half - 2) {
            p_mats[(m + m_half) as usize] = Some(build_p_matrix(grid, &panels, m, asc_of));
        }

        // Laurent rows a_n, reading the mode -n profile (parity (-1)^n).
        let mut laurent_rows = Vec::new();
        for n in 0..(m_half as usize - 1) {
            let sigma = if n % 2 == 0 { 1.0 } else { -1.0 };
            let mut row = vec![0.0; n_r];
            for p in 0..n_panels {
                for q in 0..PANEL_Q {
                    let rho = panels.rho[p][q];
                    let coeff = 2.0 * panels.w[p][q] * rho.powi(n as i32 + 1);
                    let interp = if sigma > 0.0 {
                        &panels.rows_even[p][q]
                    } else {
                        &panels.rows_odd[p][q]
                    };
                    for j in 0..n_r {
                        row[j] += coeff * interp[j];
                    }
                }
            }
            laurent_rows.push(row);
        }

        // (P f)_0(0) = -2 int_0^R f_1 drho  (mode 1, odd parity).
        let mut p0_row = vec![0.0; n_r];
        // (T f)_0(0) = -2 int_0^R f_2 / rho drho (mode 2, even parity).
        let mut t0_row = vec![0.0; n_r];
        for p in 0..n_panels {
            for q in 0..PANEL_Q {
                let rho = panels.rho[p][q];
                let w = panels.w[p][q];
                for j in 0..n_r {
                    p0_row[j] += -2.0 * w * panels.rows_odd[p][q][j];
                    t0_row[j] += -2.0 * w / rho * panels.rows_even[p][q][j];
                }
            }
        }

        CauchyWorkspace {
            n_r,
            n_theta,
            t_mats,
            p_mats,
            laurent_rows,
            p0_row,
            t0_row,
        }
    }

    fn mat_apply(
        mat: &DMatrix<f64>,
        profile: &[Complex64],
        out: &mut [Complex64],
    ) {
        let n = profile.len();
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += mat[(i, j)] * profile[j];
            }
            out[i] = acc;
        }
    }

    /// Beurling transform in modal layout (`slot * n_r + ring`).
    pub fn apply_t_modes(&self, grid: &DiscGrid, modes: &[Complex64]) -> Vec<Complex64> {
        let m_half = self.n_theta as i64 / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); modes.len()];
        for out_m in (-m_half + 1)..=(m_half - 1) {
            let Some(mat) = self.t_mats[(out_m + m_half) as usize].as_ref() else {
                continue;
            };
            let in_m = out_m + 2;
            let in_slot = in_m.rem_euclid(self.n_theta as i64) as usize;
            let out_slot = out_m.rem_euclid(self.n_theta as i64) as usize;
            let profile = &modes[in_slot * self.n_r..(in_slot + 1) * self.n_r];
            if profile.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            Self::mat_apply(mat, profile, &mut out[out_slot * self.n_r..(out_slot + 1) * self.n_r]);
        }
        let _ = grid;
        out
    }

    /// Cauchy transform in modal layout.
    pub fn apply_p_modes(&self, grid: &DiscGrid, modes: &[Complex64]) -> Vec<Complex64> {
        let m_half = self.n_theta as i64 / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); modes.len()];
        for out_m in (-m_half + 1)..=(m_half - 1) {
            let Some(mat) = self.p_mats[(out_m + m_half) as usize].as_ref() else {
                continue;
            };
            let in_m = out_m + 1;
            let in_slot = in_m.rem_euclid(self.n_theta as i64) as usize;
            let out_slot = out_m.rem_euclid(self.n_theta as i64) as usize;
            let profile = &modes[in_slot * self.n_r..(in_slot + 1) * self.n_r];
            if profile.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            Self::mat_apply(mat, profile, &mut out[out_slot * self.n_r..(out_slot + 1) * self.n_r]);
        }
        let _ = grid;
        out
    }

    /// Exterior Laurent coefficients of `P f`: `P f(z) = sum_n a_n z^{-n-1}`
    /// for `|z| > R`.
    pub fn laurent_coeffs(&self, modes: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.laurent_rows.len());
        for (n, row) in self.laurent_rows.iter().enumerate() {
            let slot = (-(n as i64)).rem_euclid(self.n_theta as i64) as usize;
            let profile = &modes[slot * self.n_r..(slot + 1) * self.n_r];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.n_r {
                acc += row[j] * profile[j];
            }
            out.push(acc);
        }
        out
    }

    /// `(P f)(0)`.
    pub fn p_at_zero(&self, modes: &[Complex64]) -> Complex64 {
        let slot = 1usize;
        let profile = &modes[slot * self.n_r..(slot + 1) * self.n_r];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.n_r {
            acc += self.p0_row[j] * profile[j];
        }
        acc
    }

    /// `(T f)(0)`.
    pub fn t_at_zero(&self, modes: &[Complex64]) -> Complex64 {
        let slot = 2usize;
        let profile = &modes[slot * self.n_r..(slot + 1) * self.n_r];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.n_r {
            acc += self.t0_row[j] * profile[j];
        }
        acc
    }
}

fn build_t_matrix(
    grid: &DiscGrid,
    panels: &Panels,
    m: i64,
    asc_of: impl Fn(usize) -> usize,
) -> DMatrix<f64> {
    let n_r = grid.n_r();
    let sigma = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut mat = DMatrix::zeros(n_r, n_r);
    // Identity part: f_{m+2}(r_i) itself.
    for i in 0..n_r {
        mat[(i, i)] = 1.0;
    }
    if m == -1 {
        return mat; // prefactor 2(m+1) vanishes
    }
    let n_panels = panels.rho.len();
    for i in 0..n_r {
        let r_i = grid.r_nodes()[i];
        let p_i = asc_of(i); // r_i is the upper boundary of panel p_i
        if m >= 0 {
            // -2(m+1) int_r^R f (r/rho)^m drho / rho over panels above r_i.
            for p in (p_i + 1)..n_panels {
                for q in 0..PANEL_Q {
                    let rho = panels.rho[p][q];
                    let kern = (r_i / rho).powi(m as i32) / rho;
                    let coeff = -2.0 * (m + 1) as f64 * panels.w[p][q] * kern;
                    let interp = if sigma > 0.0 {
                        &panels.rows_even[p][q]
                    } else {
                        &panels.rows_odd[p][q]
                    };
                    for j in 0..n_r {
                        mat[(i, j)] += coeff * interp[j];
                    }
                }
            }
        } else {
            // +2(m+1) int_0^r f (rho/r)^{-m-1} drho / r over panels below r_i.
            for p in 0..=p_i {
                for q in 0..PANEL_Q {
                    let rho = panels.rho[p][q];
                    let kern = (rho / r_i).powi((-m - 1) as i32) / r_i;
                    let coeff = 2.0 * (m + 1) as f64 * panels.w[p][q] * kern;
                    let interp = if sigma > 0.0 {
                        &panels.rows_even[p][q]
                    } else {
                        &panels.rows_odd[p][q]
                    };
                    for j in 0..n_r {
                        mat[(i, j)] += coeff * interp[j];
                    }
                }
            }
        }
    }
    mat
}

fn build_p_matrix(
    grid: &DiscGrid,
    panels: &Panels,
    m: i64,
    asc_of: impl Fn(usize) -> usize,
) -> DMatrix<f64> {
    let n_r = grid.n_r();
    // Input profile is mode m+1.
    let sigma = if (m + 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut mat = DMatrix::zeros(n_r, n_r);
    let n_panels = panels.rho.len();
    for i in 0..n_r {
        let r_i = grid.r_nodes()[i];
        let p_i = asc_of(i);
        if m >= 0 {
            for p in (p_i + 1)..n_panels {
                for q in 0..PANEL_Q {
                    let rho = panels.rho[p][q];
                    let kern = (r_i / rho).powi(m as i32);
                    let coeff = -2.0 * panels.w[p][q] * kern;
                    let interp = if sigma > 0.0 {
                        &panels.rows_even[p][q]
                    } else {
                        &panels.rows_odd[p][q]
                    };
                    for j in 0..n_r {
                        mat[(i, j)] += coeff * interp[j];
                    }
                }
            }
        } else {
            for p in 0..=p_i {
                for q in 0..PANEL_Q {
                    let rho = panels.rho[p][q];
                    let kern = (rho / r_i).powi((-m) as i32);
                    let coeff = 2.0 * panels.w[p][q] * kern;
                    let interp = if sigma > 0.0 {
                        &panels.rows_even[p][q]
                    } else {
                        &panels.rows_odd[p][q]
                    };
                    for j in 0..n_r {
                        mat[(i, j)] += coeff * interp[j];
                    }
                }
            }
        }
    }
    mat
}

/// Beurling transform of a disc-supported field (zero-extended beyond `R`).
pub fn beurling(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let ws = grid.cauchy();
    let modes = crate::diff::to_modes(field);
    let out = ws.apply_t_modes(grid, &modes);
    crate::diff::from_modes(grid, &out)
}

/// Cauchy transform (`d_zbar`-primitive) of a disc-supported field.
pub fn cauchy_transform(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let ws = grid.cauchy();
    let modes = crate::diff::to_modes(field);
    let out = ws.apply_p_modes(grid, &modes);
    crate::diff::from_modes(grid, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::d_zbar;
    use crate::grid::make_grid;

    fn sup_err(f: &ComplexField, want: impl Fn(Complex64) -> Complex64) -> f64 {
        let g = f.grid();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let z = g.node(j, k);
                worst = worst.max((f.values()[g.idx(j, k)] - want(z)).norm());
            }
        }
        worst
    }

    #[test]
    fn cauchy_of_one_is_zbar() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        let p = cauchy_transform(&f);
        assert!(sup_err(&p, |z| z.conj()) < 1e-11);
    }

    #[test]
    fn cauchy_of_zbar_powers() {
        let g = make_grid(24, 48, 0.9).unwrap();
        for k in 1..4i32 {
            let f = ComplexField::from_fn(g.clone(), |z| z.conj().powi(k));
            let p = cauchy_transform(&f);
            let e = sup_err(&p, |z| z.conj().powi(k + 1) / (k as f64 + 1.0));
            assert!(e < 1e-10, "k={k}: {e}");
        }
    }

    #[test]
    fn cauchy_of_z_powers_closed_form() {
        let g = make_grid(24, 48, 0.85).unwrap();
        let rr = 0.85f64 * 0.85;
        for k in 1..4i32 {
            let f = ComplexField::from_fn(g.clone(), |z| z.powi(k));
            let p = cauchy_transform(&f);
            let e = sup_err(&p, |z| -z.powi(k - 1) * (rr - z.norm_sqr()));
            assert!(e < 1e-10, "k={k}: {e}");
        }
    }

    #[test]
    fn beurling_annihilates_antiholomorphic() {
        let g = make_grid(24, 48, 0.9).unwrap();
        for k in 0..3i32 {
            let f = ComplexField::from_fn(g.clone(), |z| z.conj().powi(k));
            let t = beurling(&f);
            assert!(sup_err(&t, |_| Complex64::new(0.0, 0.0)) < 1e-10, "k={k}");
        }
    }

    #[test]
    fn beurling_of_z_powers_closed_form() {
        let g = make_grid(24, 48, 0.85).unwrap();
        let rr = 0.85f64 * 0.85;
        for k in 1..4i32 {
            let f = ComplexField::from_fn(g.clone(), |z| z.powi(k));
            let t = beurling(&f);
            let e = sup_err(&t, |z| {
                -(k as f64 - 1.0) * z.powi(k - 2) * (rr - z.norm_sqr()) + z.powi(k - 1) * z.conj()
            });
            assert!(e < 1e-9, "k={k}: {e}");
        }
    }

    #[test]
    fn cauchy_is_dzbar_primitive() {
        let g = make_grid(32, 64, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| (0.5 * z).exp() + 0.3 * z.conj() * z);
        let p = cauchy_transform(&f);
        let back = d_zbar(&p);
        let e = back.sub(&f).unwrap().sup_norm();
        assert!(e < 1e-8, "primitive defect {e}");
    }

    #[test]
    fn laurent_matches_exterior_moments() {
        // f = 1: a_0 = 2 int_0^R rho drho = R^2, higher a_n = 0.
        let g = make_grid(16, 32, 0.8).unwrap();
        let f = ComplexField::from_fn(g.clone(), |_| Complex64::new(1.0, 0.0));
        let modes = crate::diff::to_modes(&f);
        let a = g.cauchy().laurent_coeffs(&modes);
        assert!((a[0] - Complex64::new(0.64, 0.0)).norm() < 1e-12);
        for n in 1..a.len() {
            assert!(a[n].norm() < 1e-12);
        }
    }

    #[test]
    fn p_and_t_at_zero() {
        // f = z: (P f)(0) = -2 int_0^R rho drho = -R^2; (T f)(0) = 0.
        let g = make_grid(16, 32, 0.8).unwrap();
        let f = ComplexField::from_fn(g.clone(), |z| z);
        let modes = crate::diff::to_modes(&f);
        let ws = g.cauchy();
        assert!((ws.p_at_zero(&modes) - Complex64::new(-0.64, 0.0)).norm() < 1e-12);
        // f = z^2: (T f)(0) = -2 int_0^R rho^2/rho drho = -R^2... times profile of z^2 at mode 2 = rho^2 -> -2 int rho drho = -R^2.
        let f2 = ComplexField::from_fn(g.clone(), |z| z * z);
        let modes2 = crate::diff::to_modes(&f2);
        assert!((ws.t_at_zero(&modes2) - Complex64::new(-0.64, 0.0)).norm() < 1e-12);
    }
}
