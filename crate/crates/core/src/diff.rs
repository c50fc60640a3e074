//! Complex differential operators on the polar grid.
//!
//! Angular derivatives are Fourier-exact; radial derivatives use the
//! parity-folded Chebyshev matrix of the doubled diameter.  In modal form,
//! with `f = sum_m f_m(r) e^{i m theta}`,
//!
//! ```text
//! d_z f    = 1/2 sum_m (f_m' + m f_m / r) e^{i (m-1) theta}
//! d_zbar f = 1/2 sum_m (f_m' - m f_m / r) e^{i (m+1) theta}
//! ```
//!
//! `d_zbar` is implemented as `conj . d_z . conj`, so the conjugation identity
//! holds nodewise exactly.

use num_complex::Complex64;

use crate::field::ComplexField;
use crate::grid::DiscGrid;

/// Angular FFT of a field: returns mode profiles laid out `slot * n_r + ring`.
/// The Nyquist slot is zeroed (it carries no usable phase information).
pub(crate) fn to_modes(field: &ComplexField) -> Vec<Complex64> {
    let grid = field.grid();
    let n_r = grid.n_r();
    let n_theta = grid.n_theta();
    let mut ring = vec![Complex64::new(0.0, 0.0); n_theta];
    let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
    let scale = 1.0 / n_theta as f64;
    for j in 0..n_r {
        ring.copy_from_slice(&field.values()[j * n_theta..(j + 1) * n_theta]);
        grid.fft_forward(&mut ring);
        for (slot, v) in ring.iter().enumerate() {
            out[slot * n_r + j] = v * scale;
        }
    }
    let nyquist = n_theta / 2;
    for j in 0..n_r {
        out[nyquist * n_r + j] = Complex64::new(0.0, 0.0);
    }
    out
}

/// Inverse of [`to_modes`].
pub(crate) fn from_modes(grid: &std::sync::Arc<DiscGrid>, modes: &[Complex64]) -> ComplexField {
    let n_r = grid.n_r();
    let n_theta = grid.n_theta();
    let mut values = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
    let mut ring = vec![Complex64::new(0.0, 0.0); n_theta];
    for j in 0..n_r {
        for slot in 0..n_theta {
            ring[slot] = modes[slot * n_r + j];
        }
        grid.fft_inverse(&mut ring);
        values[j * n_theta..(j + 1) * n_theta].copy_from_slice(&ring);
    }
    ComplexField::new(grid.clone(), values).expect("mode layout matches grid")
}

fn slot_of_mode(n_theta: usize, m: i64) -> Option<usize> {
    let half = n_theta as i64 / 2;
    if m <= -half || m >= half {
        return None;
    }
    Some(m.rem_euclid(n_theta as i64) as usize)
}

/// Holomorphic derivative `d_z`.
pub fn d_z(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let n_r = grid.n_r();
    let n_theta = grid.n_theta();
    let modes = to_modes(field);
    let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
    let r = grid.r_nodes();
    for slot in 0..n_theta {
        let m = grid.mode_of_slot(slot);
        if slot == n_theta / 2 {
            continue;
        }
        let profile = &modes[slot * n_r..(slot + 1) * n_r];
        if profile.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let sigma = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let d = grid.fold_d1(sigma);
        let Some(out_slot) = slot_of_mode(n_theta, m - 1) else {
            continue;
        };
        for i in 0..n_r {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n_r {
                acc += d[(i, j)] * profile[j];
            }
            acc += m as f64 / r[i] * profile[i];
            out[out_slot * n_r + i] += 0.5 * acc;
        }
    }
    from_modes(grid, &out)
}

/// Anti-holomorphic derivative `d_zbar`, defined through conjugation so that
/// `d_zbar(f) == conj(d_z(conj(f)))` is exact.
pub fn d_zbar(field: &ComplexField) -> ComplexField {
    d_z(&field.conj()).conj()
}

/// Laplacian via its per-mode radial matrices (`2 d_z d_zbar = Delta / 2`).
pub fn laplacian(field: &ComplexField) -> ComplexField {
    let grid = field.grid();
    let n_r = grid.n_r();
    let n_theta = grid.n_theta();
    let modes = to_modes(field);
    let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
    for slot in 0..n_theta {
        if slot == n_theta / 2 {
            continue;
        }
        let m = grid.mode_of_slot(slot);
        let profile = &modes[slot * n_r..(slot + 1) * n_r];
        if profile.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let l = laplacian_mode_matrix(grid, m);
        for i in 0..n_r {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n_r {
                acc += l[(i, j)] * profile[j];
            }
            out[slot * n_r + i] = acc;
        }
    }
    from_modes(grid, &out)
}

/// Radial matrix of the Laplacian restricted to angular mode `m`.
pub(crate) fn laplacian_mode_matrix(grid: &DiscGrid, m: i64) -> nalgebra::DMatrix<f64> {
    let sigma = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let n_r = grid.n_r();
    let d1 = grid.fold_d1(sigma);
    let mut l = grid.fold_d2(sigma);
    let r = grid.r_nodes();
    for i in 0..n_r {
        for j in 0..n_r {
            l[(i, j)] += d1[(i, j)] / r[i];
        }
        l[(i, i)] -= (m * m) as f64 / (r[i] * r[i]);
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn sup_err(f: &ComplexField, want: impl Fn(Complex64) -> Complex64) -> f64 {
        let g = f.grid();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let z = g.node(j, k);
                let e = (f.values()[g.idx(j, k)] - want(z)).norm();
                worst = worst.max(e);
            }
        }
        worst
    }

    #[test]
    fn d_z_of_z_is_one() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| z);
        let d = d_z(&f);
        assert!(sup_err(&d, |_| Complex64::new(1.0, 0.0)) < 1e-10);
    }

    #[test]
    fn d_zbar_of_z_is_zero() {
        let g = make_grid(24, 48, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| z);
        let d = d_zbar(&f);
        assert!(sup_err(&d, |_| Complex64::new(0.0, 0.0)) < 1e-10);
    }

    #[test]
    fn d_z_of_z_squared() {
        let g = make_grid(32, 64, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| z * z);
        let d = d_z(&f);
        assert!(sup_err(&d, |z| 2.0 * z) < 1e-9);
    }

    #[test]
    fn mixed_polynomial_derivatives() {
        let g = make_grid(24, 48, 0.8).unwrap();
        // f = z^2 conj(z) + 3 conj(z)^2
        let f = ComplexField::from_fn(g, |z| z * z * z.conj() + 3.0 * z.conj() * z.conj());
        let dz = d_z(&f);
        let dzb = d_zbar(&f);
        assert!(sup_err(&dz, |z| 2.0 * z * z.conj()) < 1e-9);
        assert!(sup_err(&dzb, |z| z * z + 6.0 * z.conj()) < 1e-9);
    }

    #[test]
    fn conjugation_identity_exact() {
        let g = make_grid(16, 32, 0.9).unwrap();
        let f = ComplexField::from_fn(g, |z| (z + 0.2 * z.conj()).exp());
        let lhs = d_zbar(&f);
        let rhs = d_z(&f.conj()).conj();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn laplacian_matches_d_z_d_zbar() {
        let g = make_grid(24, 48, 0.8).unwrap();
        let f = ComplexField::from_fn(g, |z| (0.7 * z).exp() + z.conj() * z);
        let lap = laplacian(&f);
        let via = d_z(&d_zbar(&f)).scale(Complex64::new(4.0, 0.0));
        let diff = lap.sub(&via).unwrap().sup_norm();
        assert!(diff < 1e-7, "laplacian mismatch {diff}");
    }
}
