//! Polar tensor discretization of a truncated unit disc.
//!
//! Radial nodes are the positive half of a Chebyshev-Gauss-Lobatto grid on the
//! full diameter `[-R, R]`; an odd polynomial degree keeps the origin out of
//! the node set while `r = R` stays in it, so Dirichlet data can be imposed on
//! the outer ring.  A function on the disc extends to the diameter through
//! `f(-r, theta) = f(r, theta + pi)`, which turns radial differentiation into
//! a parity-folded Chebyshev differentiation (Trefethen, "Spectral Methods in
//! MATLAB", ch. 11).  Angular sampling is uniform, so all angular operations
//! are Fourier-exact below the Nyquist mode.
//!
//! Quadrature weights integrate `p(r) * r dr dtheta` exactly for radial
//! polynomials up to the grid degree; they come from Chebyshev moments of the
//! weight `|t|` on the diameter.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::cauchy::CauchyWorkspace;
use crate::error::GeometryError;

/// Polar grid on the disc of radius `R < 1`, with quadrature weights and the
/// spectral machinery shared by every field living on it.
pub struct DiscGrid {
    n_r: usize,
    n_theta: usize,
    radius: f64,
    r_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// Full diameter nodes in the Chebyshev coordinate `t in [-1, 1]`,
    /// descending; the first `n_r` entries are the positive half.
    t_full: Vec<f64>,
    /// First-derivative Chebyshev collocation matrix on `t_full`, scaled to
    /// radius units (d/dr).
    d1_full: DMatrix<f64>,
    /// Second derivative, same scaling.
    d2_full: DMatrix<f64>,
    /// Values-at-`t_full` to Chebyshev-coefficients map.
    vals_to_cheb: DMatrix<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    cauchy: OnceLock<CauchyWorkspace>,
    /// Serializes construction of the Cauchy workspace.
    cauchy_guard: Mutex<()>,
}

impl std::fmt::Debug for DiscGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscGrid")
            .field("n_r", &self.n_r)
            .field("n_theta", &self.n_theta)
            .field("radius", &self.radius)
            .finish()
    }
}

impl DiscGrid {
    /// Builds a grid with `n_r` radial rings, `n_theta` angular samples and
    /// truncation radius `radius`.
    pub fn new(n_r: usize, n_theta: usize, radius: f64) -> Result<Arc<Self>, GeometryError> {
        if n_r < 4 {
            return Err(GeometryError::InvalidParameter(format!(
                "n_r = {n_r}, need n_r >= 4"
            )));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(GeometryError::InvalidParameter(format!(
                "n_theta = {n_theta}, need even n_theta >= 8"
            )));
        }
        if !(radius > 0.0 && radius < 1.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "R = {radius}, need 0 < R < 1"
            )));
        }

        let n_full = 2 * n_r; // polynomial degree N = 2 n_r - 1 is odd
        let degree = n_full - 1;
        let mut t_full = vec![0.0; n_full];
        for j in 0..n_full {
            if 2 * j < degree {
                t_full[j] = (PI * j as f64 / degree as f64).cos();
            }
        }
        // Mirror the second half so t[N - j] = -t[j] holds exactly.
        for j in 0..n_full {
            if 2 * j > degree {
                t_full[j] = -t_full[degree - j];
            }
        }

        let r_nodes: Vec<f64> = t_full[..n_r].iter().map(|t| radius * t).collect();
        let theta_nodes: Vec<f64> = (0..n_theta)
            .map(|k| 2.0 * PI * k as f64 / n_theta as f64)
            .collect();

        let d_cheb = cheb_diff_matrix(&t_full);
        let d1_full = d_cheb.map(|v| v / radius);
        let d2_full = &d1_full * &d1_full;
        let vals_to_cheb = cheb_vals_to_coeffs(n_full);

        // Radial ring weights W_j: exact for the |t|-weighted Chebyshev
        // moments, so integrate() reproduces polynomial moments of r.
        let moments = abs_weight_moments(n_full);
        let mut ring_w = vec![0.0; n_r];
        for (j, w) in ring_w.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, m) in moments.iter().enumerate() {
                acc += m * vals_to_cheb[(k, j)];
            }
            *w = radius * radius * acc;
        }

        let dtheta = 2.0 * PI / n_theta as f64;
        let mut quad_weights = vec![0.0; n_r * n_theta];
        for j in 0..n_r {
            for k in 0..n_theta {
                quad_weights[j * n_theta + k] = ring_w[j] * dtheta;
            }
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n_theta);
        let fft_inv = planner.plan_fft_inverse(n_theta);

        Ok(Arc::new(DiscGrid {
            n_r,
            n_theta,
            radius,
            r_nodes,
            theta_nodes,
            quad_weights,
            t_full,
            d1_full,
            d2_full,
            vals_to_cheb,
            fft_fwd,
            fft_inv,
            cauchy: OnceLock::new(),
            cauchy_guard: Mutex::new(()),
        }))
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of nodes, `n_r * n_theta`.
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radial ring values, descending from `R`.
    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    /// Area weights (including the Jacobian `r`), node-indexed.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Linear node index of ring `j`, angle `k`.
    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.n_theta + k
    }

    /// Complex coordinate of node `(j, k)`.
    #[inline]
    pub fn node(&self, j: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.r_nodes[j], self.theta_nodes[k])
    }

    /// All node coordinates in index order.
    pub fn nodes(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n_r {
            for k in 0..self.n_theta {
                out.push(self.node(j, k));
            }
        }
        out
    }

    /// Nyquist-excluded angular mode for FFT slot `k`.
    #[inline]
    pub fn mode_of_slot(&self, k: usize) -> i64 {
        if k < self.n_theta / 2 {
            k as i64
        } else {
            k as i64 - self.n_theta as i64
        }
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.fft_fwd.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.fft_inv.process(buf);
    }

    pub(crate) fn t_full(&self) -> &[f64] {
        &self.t_full
    }

    pub(crate) fn vals_to_cheb(&self) -> &DMatrix<f64> {
        &self.vals_to_cheb
    }

    /// Parity-folded radial derivative matrix acting on positive-half ring
    /// values of an angular mode with parity `sigma = (-1)^m`.
    pub(crate) fn fold_d1(&self, sigma: f64) -> DMatrix<f64> {
        fold(&self.d1_full, self.n_r, sigma)
    }

    pub(crate) fn fold_d2(&self, sigma: f64) -> DMatrix<f64> {
        fold(&self.d2_full, self.n_r, sigma)
    }

    /// Lazily built Cauchy/Beurling transform workspace.
    pub(crate) fn cauchy(&self) -> &CauchyWorkspace {
        if let Some(ws) = self.cauchy.get() {
            return ws;
        }
        let _lock = self.cauchy_guard.lock().unwrap();
        if self.cauchy.get().is_none() {
            let ws = CauchyWorkspace::build(self);
            let _ = self.cauchy.set(ws);
        }
        self.cauchy.get().unwrap()
    }

    /// True when both handles describe the same discretization.
    pub fn same_grid(a: &Arc<DiscGrid>, b: &Arc<DiscGrid>) -> bool {
        Arc::ptr_eq(a, b)
            || (a.n_r == b.n_r && a.n_theta == b.n_theta && a.radius == b.radius)
    }
}

/// `make_grid` from the in-process API: alias for [`DiscGrid::new`].
pub fn make_grid(n_r: usize, n_theta: usize, radius: f64) -> Result<Arc<DiscGrid>, GeometryError> {
    DiscGrid::new(n_r, n_theta, radius)
}

/// Process-wide grid cache: repeated solves on the same discretization share
/// the (expensive, lazily built) transform workspaces.
pub fn cached_grid(
    n_r: usize,
    n_theta: usize,
    radius: f64,
) -> Result<Arc<DiscGrid>, GeometryError> {
    static CACHE: Mutex<Vec<((usize, usize, u64), Arc<DiscGrid>)>> = Mutex::new(Vec::new());
    let key = (n_r, n_theta, radius.to_bits());
    let mut cache = CACHE.lock().unwrap();
    if let Some((_, g)) = cache.iter().find(|(k, _)| *k == key) {
        return Ok(g.clone());
    }
    let g = DiscGrid::new(n_r, n_theta, radius)?;
    cache.push((key, g.clone()));
    Ok(g)
}

/// Parity fold of a full-diameter matrix onto the positive half.
fn fold(m: &DMatrix<f64>, n_r: usize, sigma: f64) -> DMatrix<f64> {
    let n_full = 2 * n_r;
    let degree = n_full - 1;
    DMatrix::from_fn(n_r, n_r, |i, j| m[(i, j)] + sigma * m[(i, degree - j)])
}

/// Chebyshev-Gauss-Lobatto collocation derivative on the given descending
/// node set, with the negative-sum trick on the diagonal.
fn cheb_diff_matrix(t: &[f64]) -> DMatrix<f64> {
    let n = t.len();
    let deg = n - 1;
    let c = |i: usize| -> f64 {
        if i == 0 || i == deg {
            2.0
        } else {
            1.0
        }
    };
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

/// Map from Gauss-Lobatto values to Chebyshev coefficients.
fn cheb_vals_to_coeffs(n: usize) -> DMatrix<f64> {
    let deg = n - 1;
    let gamma = |i: usize| -> f64 {
        if i == 0 || i == deg {
            2.0
        } else {
            1.0
        }
    };
    DMatrix::from_fn(n, n, |k, j| {
        let w = (PI * (j * k) as f64 / deg as f64).cos();
        let edge = if j == 0 || j == deg { 0.5 } else { 1.0 };
        2.0 / (deg as f64 * gamma(k)) * edge * w
    })
}

/// Chebyshev moments of the weight `|t|` on `[-1, 1]`.
fn abs_weight_moments(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n];
    let mut k = 0usize;
    while 2 * k < n {
        if k % 2 == 0 {
            let kk = k as f64;
            m[2 * k] = 1.0 / (1.0 - kk * kk);
        }
        k += 1;
    }
    m
}

/// Chebyshev coefficients -> value at `t` by Clenshaw recurrence.
pub(crate) fn clenshaw(coeffs: &[Complex64], t: f64) -> Complex64 {
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        let b0 = c + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1 - t * b2
}

/// Barycentric weights of the full Gauss-Lobatto node set.
pub(crate) fn barycentric_weights(n: usize) -> Vec<f64> {
    let deg = n - 1;
    (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == deg {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Row of the interpolation operator from `t`-node values to the point `x`.
pub(crate) fn barycentric_row(t: &[f64], w: &[f64], x: f64) -> Vec<f64> {
    let n = t.len();
    for (j, &tj) in t.iter().enumerate() {
        if x == tj {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            return row;
        }
    }
    let mut num = vec![0.0; n];
    let mut den = 0.0;
    for j in 0..n {
        let v = w[j] / (x - t[j]);
        num[j] = v;
        den += v;
    }
    num.iter_mut().for_each(|v| *v /= den);
    num
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub(crate) fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(q, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(q, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_pair(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let kk = k as f64;
        let p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
    }
    let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
