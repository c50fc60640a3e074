//! Quasiconformal maps of the disc: the Beltrami equation solver and the
//! group-level operations built on it.
//!
//! The plane solution with disc-supported coefficient comes from the
//! classical fixed point `h = mu (1 + T h)`, `w = z + P h`, where `T` and `P`
//! are the modal Beurling and Cauchy transforms of [`crate::cauchy`]; the
//! iteration contracts at rate `||mu||_inf`.  Outside the support the map is
//! the explicit Laurent tail, so it is conformal there and its Schwarzian is
//! available in closed form.
//!
//! A disc-preserving solution is obtained by post-composing with the Riemann
//! map of the image domain `w(D)` and the Moebius transform fixing
//! `1, -1, -i`: conformal post-composition leaves the Beltrami coefficient
//! untouched while restoring the circle.

use std::sync::Arc;

use num_complex::Complex64;

use crate::annulus::{AnnulusField, AnnulusGrid};
use crate::diff::{d_z, d_zbar};
use crate::differentials::TangentField;
use crate::error::{GeometryError, SolveError};
use crate::field::{ComplexField, Interpolant};
use crate::grid::DiscGrid;
use crate::moebius::Moebius;
use crate::riemann::RiemannMap;

/// Solver regime cap for the coefficient sup-norm.
pub const SUP_NORM_LIMIT: f64 = 0.5;

const MAX_FIXED_POINT_ITERS: usize = 400;
const INVERT_MAX_ITERS: usize = 60;

/// Beltrami coefficient: a complex field with `sup |mu| < 1`.
#[derive(Clone)]
pub struct BeltramiCoefficient {
    field: ComplexField,
    sup_norm: f64,
}

impl BeltramiCoefficient {
    pub fn new(field: ComplexField) -> Result<Self, GeometryError> {
        let sup_norm = field.sup_norm();
        if sup_norm >= 1.0 {
            return Err(GeometryError::InvalidParameter(format!(
                "coefficient sup-norm {sup_norm} >= 1"
            )));
        }
        Ok(BeltramiCoefficient { field, sup_norm })
    }

    pub fn zero(grid: Arc<DiscGrid>) -> Self {
        BeltramiCoefficient {
            field: ComplexField::zeros(grid),
            sup_norm: 0.0,
        }
    }

    pub fn from_fn(
        grid: Arc<DiscGrid>,
        f: impl FnMut(Complex64) -> Complex64,
    ) -> Result<Self, GeometryError> {
        Self::new(ComplexField::from_fn(grid, f))
    }

    /// Harmonic representative `e^{-psi} conj(q)` of a tangent direction.
    pub fn from_tangent(nu: &TangentField) -> Result<Self, GeometryError> {
        Self::new(nu.field().clone())
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.field.grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    /// Weil-Petersson norm `(int |mu|^2 e^psi)^{1/2}` on the truncated disc.
    pub fn wp_norm(&self) -> f64 {
        let weighted = self.field.map(|v| {
            Complex64::new(v.norm_sqr(), 0.0)
        });
        let g = self.field.grid();
        let dens = crate::hyperbolic::hyperbolic_density(g);
        let mut acc = 0.0;
        for (i, w) in g.quad_weights().iter().enumerate() {
            acc += weighted.values()[i].re * dens.values()[i] * w;
        }
        acc.max(0.0).sqrt()
    }
}

/// Normalization of a Beltrami solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Disc-preserving solution fixing `1, -1, -i`.
    FixThreePoints,
    /// Plane solution with `w(0) = 0`, `w_z(0) = 1`, `w_zz(0) = 0`
    /// (coefficient extended by zero outside the disc).
    SeriesAtZero,
}

/// Coefficient reflected to the exterior of the unit disc,
/// `mu(z) = conj(mu(1/zbar)) z^2 / zbar^2` for `|z| > 1`.
pub struct ReflectedCoefficient {
    interior: ComplexField,
    interp: Interpolant,
    exterior_radii: Vec<f64>,
    exterior_values: Vec<Complex64>,
}

impl ReflectedCoefficient {
    pub fn exterior_radii(&self) -> &[f64] {
        &self.exterior_radii
    }

    pub fn exterior_values(&self) -> &[Complex64] {
        &self.exterior_values
    }

    /// Evaluates the extension anywhere (interior by interpolation, exterior
    /// by the reflection formula; the reflected point is clamped to the grid
    /// disc like any interior evaluation).
    pub fn eval(&self, z: Complex64) -> Complex64 {
        if z.norm() <= 1.0 {
            self.interp.eval(z)
        } else {
            let zr = 1.0 / z.conj();
            let ratio = z / z.conj();
            self.interp.eval(zr).conj() * ratio * ratio
        }
    }

    pub fn interior(&self) -> &ComplexField {
        &self.interior
    }
}

/// Reflection extension of a coefficient across the unit circle.
pub fn reflect_extension(mu: &BeltramiCoefficient) -> ReflectedCoefficient {
    let grid = mu.grid();
    let interp = mu.field().interpolant();
    let mut exterior_radii = Vec::with_capacity(grid.n_r());
    for &r in grid.r_nodes() {
        exterior_radii.push(1.0 / r);
    }
    let mut exterior_values = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let z = Complex64::from_polar(exterior_radii[j], grid.theta_nodes()[k]);
            let zr = 1.0 / z.conj();
            let ratio = z / z.conj();
            exterior_values.push(interp.eval(zr).conj() * ratio * ratio);
        }
    }
    ReflectedCoefficient {
        interior: mu.field().clone(),
        interp,
        exterior_radii,
        exterior_values,
    }
}

/// A solved quasiconformal map.
pub struct QCMap {
    mu: BeltramiCoefficient,
    values: ComplexField,
    wz: ComplexField,
    wzb: ComplexField,
    boundary_trace: Vec<Complex64>,
    normalization: Normalization,
    residual: f64,
    norm_points: Option<[Complex64; 3]>,
    eval_data: MapEvaluator,
}

struct MapEvaluator {
    radius: f64,
    identity: bool,
    interp_w: Option<Interpolant>,
    interp_wz: Option<Interpolant>,
    interp_wzb: Option<Interpolant>,
    laurent: Vec<Complex64>,
    sigma: Option<RiemannMap>,
    moebius: Moebius,
}

impl MapEvaluator {
    fn plane_tail(&self, z: Complex64) -> (Complex64, Complex64) {
        // w_p and w_p' outside the coefficient support, from the Laurent tail.
        let mut w = z;
        let mut wd = Complex64::new(1.0, 0.0);
        let zi = 1.0 / z;
        let mut zpow = zi; // z^{-n-1}
        for (n, &a) in self.laurent.iter().enumerate() {
            w += a * zpow;
            wd -= (n as f64 + 1.0) * a * zpow * zi;
            zpow *= zi;
        }
        (w, wd)
    }
}

impl QCMap {
    pub fn mu(&self) -> &BeltramiCoefficient {
        &self.mu
    }

    pub fn grid(&self) -> &Arc<DiscGrid> {
        self.values.grid()
    }

    /// Map values at the grid nodes.
    pub fn values(&self) -> &ComplexField {
        &self.values
    }

    /// `w_z` on the grid (chain-rule accurate).
    pub fn wz(&self) -> &ComplexField {
        &self.wz
    }

    /// `w_zbar` on the grid.
    pub fn wzb(&self) -> &ComplexField {
        &self.wzb
    }

    /// Trace along the outermost ring `r = R`.
    pub fn boundary_trace(&self) -> &[Complex64] {
        &self.boundary_trace
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Grid-measured relative residual `sup|w_zbar - mu w_z| / sup|w_z|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Images of `1, -1, -i` for a disc-preserving solve.
    pub fn normalization_points(&self) -> Option<[Complex64; 3]> {
        self.norm_points
    }

    /// Worst deviation of the normalization points from `1, -1, -i`.
    pub fn normalization_defect(&self) -> f64 {
        match self.norm_points {
            None => 0.0,
            Some(p) => {
                let targets = [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(0.0, -1.0),
                ];
                p.iter()
                    .zip(&targets)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Largest radius at which the map can still be evaluated.
    pub fn eval_radius(&self) -> f64 {
        let r = self.eval_data.radius;
        r + 0.6 * (1.0 - r)
    }

    /// Evaluates the map anywhere inside [`Self::eval_radius`].
    pub fn eval(&self, z: Complex64) -> Complex64 {
        if self.eval_data.identity {
            return z;
        }
        let r = z.norm();
        if r <= self.eval_data.radius * (1.0 + 1e-12) {
            return self.eval_data.interp_w.as_ref().unwrap().eval(z);
        }
        let (wp, _) = self.eval_data.plane_tail(z);
        let s = match &self.eval_data.sigma {
            Some(sig) => sig.eval(wp),
            None => wp,
        };
        self.eval_data.moebius.apply(s)
    }

    /// Evaluates `(w, w_z, w_zbar)` anywhere inside [`Self::eval_radius`].
    pub fn eval_with_derivs(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        if self.eval_data.identity {
            return (z, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let r = z.norm();
        if r <= self.eval_data.radius * (1.0 + 1e-12) {
            let w = self.eval_data.interp_w.as_ref().unwrap().eval(z);
            let wz = self.eval_data.interp_wz.as_ref().unwrap().eval(z);
            let wzb = self.eval_data.interp_wzb.as_ref().unwrap().eval(z);
            return (w, wz, wzb);
        }
        let (wp, wpd) = self.eval_data.plane_tail(z);
        let (s, sd) = match &self.eval_data.sigma {
            Some(sig) => sig.eval_with_deriv(wp),
            None => (wp, Complex64::new(1.0, 0.0)),
        };
        let md = self.eval_data.moebius.deriv(s);
        (
            self.eval_data.moebius.apply(s),
            md * sd * wpd,
            Complex64::new(0.0, 0.0),
        )
    }

    /// Newton inversion: finds `p` with `w(p) = target`.
    pub fn invert(&self, target: Complex64) -> Result<Complex64, SolveError> {
        if self.eval_data.identity {
            return Ok(target);
        }
        // First-order inverse as seed: p ~ target - (w(target) - target).
        let seed = 2.0 * target - self.eval(target);
        let seed = if seed.norm() < self.eval_radius() {
            seed
        } else {
            target
        };
        match self.invert_from(target, seed) {
            Ok(p) => Ok(p),
            Err(_) => {
                // Coarse scan fallback for a better seed.
                let g = self.grid();
                let mut best = target;
                let mut best_d = f64::INFINITY;
                for j in 0..g.n_r() {
                    for k in (0..g.n_theta()).step_by(4) {
                        let idx = g.idx(j, k);
                        let d = (self.values.values()[idx] - target).norm();
                        if d < best_d {
                            best_d = d;
                            best = g.node(j, k);
                        }
                    }
                }
                self.invert_from(target, best)
            }
        }
    }

    fn invert_from(&self, target: Complex64, seed: Complex64) -> Result<Complex64, SolveError> {
        let r_max = self.eval_radius();
        let mut p = seed;
        for _ in 0..INVERT_MAX_ITERS {
            if p.norm() > r_max {
                p = p / p.norm() * r_max;
            }
            let (w, wz, wzb) = self.eval_with_derivs(p);
            let e = target - w;
            if e.norm() < 1e-12 {
                return Ok(p);
            }
            let jac = wz.norm_sqr() - wzb.norm_sqr();
            if jac.abs() < 1e-14 {
                return Err(SolveError::InverseInterpolationFailure { point: p });
            }
            let mut step = (wz.conj() * e - wzb * e.conj()) / jac;
            // Damp steps that would leave the evaluable region.
            let mut next = p + step;
            let mut tries = 0;
            while next.norm() > r_max && tries < 8 {
                step *= 0.5;
                next = p + step;
                tries += 1;
            }
            p = next;
        }
        let (w, _, _) = self.eval_with_derivs(p);
        if (w - target).norm() < 1e-9 {
            Ok(p)
        } else {
            Err(SolveError::InverseInterpolationFailure { point: p })
        }
    }

    /// Restriction of a map solved on a larger grid onto `base`: field data
    /// is resampled at the base nodes while the evaluator keeps the full
    /// solve, so off-grid evaluation stays valid up to the larger radius.
    /// Used for induced Gauss maps, whose coefficient is known in closed
    /// form beyond the base truncation ring.
    pub(crate) fn resample_onto(
        self,
        base: &Arc<DiscGrid>,
        mu: BeltramiCoefficient,
    ) -> Result<QCMap, SolveError> {
        let mut vals = Vec::with_capacity(base.len());
        let mut wz_v = Vec::with_capacity(base.len());
        let mut wzb_v = Vec::with_capacity(base.len());
        for j in 0..base.n_r() {
            for k in 0..base.n_theta() {
                let (w, wz, wzb) = self.eval_with_derivs(base.node(j, k));
                vals.push(w);
                wz_v.push(wz);
                wzb_v.push(wzb);
            }
        }
        let values = ComplexField::new(base.clone(), vals).map_err(SolveError::Geometry)?;
        let wz = ComplexField::new(base.clone(), wz_v).map_err(SolveError::Geometry)?;
        let wzb = ComplexField::new(base.clone(), wzb_v).map_err(SolveError::Geometry)?;
        let wz_meas = d_z(&values);
        let wzb_meas = d_zbar(&values);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..base.len() {
            let r =
                (wzb_meas.values()[i] - mu.field().values()[i] * wz_meas.values()[i]).norm();
            num = num.max(r);
            den = den.max(wz_meas.values()[i].norm());
        }
        let residual = num / den.max(1e-300);
        let boundary_trace = values.values()[..base.n_theta()].to_vec();
        Ok(QCMap {
            mu,
            values,
            wz,
            wzb,
            boundary_trace,
            normalization: self.normalization,
            residual,
            norm_points: self.norm_points,
            eval_data: self.eval_data,
        })
    }

    /// True when the outer-ring trace winds monotonically.
    pub fn trace_is_monotone(&self) -> bool {
        let args: Vec<f64> = self.boundary_trace.iter().map(|w| w.arg()).collect();
        let n = args.len();
        let mut total = 0.0;
        for k in 0..n {
            let mut d = args[(k + 1) % n] - args[k];
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            if d <= 0.0 {
                return false;
            }
            total += d;
        }
        (total - 2.0 * std::f64::consts::PI).abs() < 1e-9
    }

    /// Orientation margin `min(|w_z| - |w_zbar|)`; positive for a solve.
    pub fn orientation_margin(&self) -> f64 {
        self.wz
            .values()
            .iter()
            .zip(self.wzb.values())
            .map(|(a, b)| a.norm() - b.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

struct PlaneSolve {
    w_values: ComplexField,
    wz: ComplexField,
    wzb: ComplexField,
    laurent: Vec<Complex64>,
    h_modes: Vec<Complex64>,
}

fn solve_plane(mu: &BeltramiCoefficient, tol: f64) -> Result<PlaneSolve, SolveError> {
    let grid = mu.grid().clone();
    let ws = grid.cauchy();
    let target = (0.01 * tol).clamp(1e-15, 1e-9);
    let mut h = mu.field().clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let th = crate::cauchy::beurling(&h);
        let next = mu
            .field()
            .zip_with(&th, |m, t| m * (Complex64::new(1.0, 0.0) + t))
            .expect("same grid");
        let delta = next.sub(&h).expect("same grid").sup_norm();
        h = next;
        if delta <= target {
            break;
        }
        if iterations >= MAX_FIXED_POINT_ITERS {
            return Err(SolveError::NoConvergence {
                iterations,
                last_delta: delta,
            });
        }
    }
    let th = crate::cauchy::beurling(&h);
    let wz = th.map(|t| t + Complex64::new(1.0, 0.0));
    let ph = crate::cauchy::cauchy_transform(&h);
    let w_values = ComplexField::from_fn(grid.clone(), |z| z)
        .add(&ph)
        .expect("same grid");
    let h_modes = crate::diff::to_modes(&h);
    let laurent = ws.laurent_coeffs(&h_modes);
    Ok(PlaneSolve {
        w_values,
        wz,
        wzb: h,
        laurent,
        h_modes,
    })
}

fn identity_map(grid: &Arc<DiscGrid>, normalization: Normalization) -> QCMap {
    let values = ComplexField::from_fn(grid.clone(), |z| z);
    let wz = ComplexField::from_fn(grid.clone(), |_| Complex64::new(1.0, 0.0));
    let wzb = ComplexField::zeros(grid.clone());
    let boundary_trace = values.values()[..grid.n_theta()].to_vec();
    let norm_points = match normalization {
        Normalization::FixThreePoints => Some([
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ]),
        Normalization::SeriesAtZero => None,
    };
    QCMap {
        mu: BeltramiCoefficient::zero(grid.clone()),
        values,
        wz,
        wzb,
        boundary_trace,
        normalization,
        residual: 0.0,
        norm_points,
        eval_data: MapEvaluator {
            radius: grid.radius(),
            identity: true,
            interp_w: None,
            interp_wz: None,
            interp_wzb: None,
            laurent: Vec::new(),
            sigma: None,
            moebius: Moebius::identity(),
        },
    }
}

/// Solves the Beltrami equation `w_zbar = mu w_z` with the coefficient
/// extended by zero outside the grid disc, then applies the requested
/// normalization.
pub fn solve_beltrami(
    mu: &BeltramiCoefficient,
    normalization: Normalization,
    tol: f64,
) -> Result<QCMap, SolveError> {
    if tol <= 0.0 {
        return Err(SolveError::Geometry(GeometryError::InvalidParameter(
            "tol must be positive".into(),
        )));
    }
    if mu.sup_norm() > SUP_NORM_LIMIT + 1e-12 {
        return Err(SolveError::NormTooLarge {
            sup: mu.sup_norm(),
            limit: SUP_NORM_LIMIT,
        });
    }
    let grid = mu.grid().clone();
    if mu.is_zero() {
        return Ok(identity_map(&grid, normalization));
    }
    let plane = solve_plane(mu, tol)?;

    let (values, wz, wzb, sigma, moebius, norm_points) = match normalization {
        Normalization::FixThreePoints => {
            let n_b = (4 * grid.n_theta()).max(512).next_power_of_two();
            let (gamma, gamma_d) = boundary_curve(&plane.laurent, n_b);
            let center = {
                let ws = grid.cauchy();
                ws.p_at_zero(&plane.h_modes)
            };
            let sig = RiemannMap::build(gamma, gamma_d, center)?;
            let p1 = unit(sig.boundary_value(0));
            let p2 = unit(sig.boundary_value(n_b / 2));
            let p3 = unit(sig.boundary_value(3 * n_b / 4));
            let m = Moebius::three_point(
                [p1, p2, p3],
                [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(0.0, -1.0),
                ],
            );
            let mut vals = Vec::with_capacity(grid.len());
            let mut wz_v = Vec::with_capacity(grid.len());
            let mut wzb_v = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let wp = plane.w_values.values()[i];
                let (s, sd) = sig.eval_with_deriv(wp);
                let md = m.deriv(s);
                vals.push(m.apply(s));
                wz_v.push(md * sd * plane.wz.values()[i]);
                wzb_v.push(md * sd * plane.wzb.values()[i]);
            }
            let norm_points = [m.apply(p1), m.apply(p2), m.apply(p3)];
            (
                ComplexField::new(grid.clone(), vals).map_err(SolveError::Geometry)?,
                ComplexField::new(grid.clone(), wz_v).map_err(SolveError::Geometry)?,
                ComplexField::new(grid.clone(), wzb_v).map_err(SolveError::Geometry)?,
                Some(sig),
                m,
                Some(norm_points),
            )
        }
        Normalization::SeriesAtZero => {
            let ws = grid.cauchy();
            let a0 = ws.p_at_zero(&plane.h_modes);
            let a1 = Complex64::new(1.0, 0.0) + ws.t_at_zero(&plane.h_modes);
            let wzz = d_z(&plane.wz);
            let a2 = wzz.interpolant().eval(Complex64::new(0.0, 0.0));
            let m = Moebius::jet_normalizer(a0, a1, a2);
            let mut vals = Vec::with_capacity(grid.len());
            let mut wz_v = Vec::with_capacity(grid.len());
            let mut wzb_v = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let wp = plane.w_values.values()[i];
                let md = m.deriv(wp);
                vals.push(m.apply(wp));
                wz_v.push(md * plane.wz.values()[i]);
                wzb_v.push(md * plane.wzb.values()[i]);
            }
            (
                ComplexField::new(grid.clone(), vals).map_err(SolveError::Geometry)?,
                ComplexField::new(grid.clone(), wz_v).map_err(SolveError::Geometry)?,
                ComplexField::new(grid.clone(), wzb_v).map_err(SolveError::Geometry)?,
                None,
                m,
                None,
            )
        }
    };

    // Independent residual measurement through the grid operators.
    let wz_meas = d_z(&values);
    let wzb_meas = d_zbar(&values);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..grid.len() {
        let r = (wzb_meas.values()[i] - mu.field().values()[i] * wz_meas.values()[i]).norm();
        num = num.max(r);
        den = den.max(wz_meas.values()[i].norm());
    }
    let residual = num / den.max(1e-300);

    let boundary_trace = values.values()[..grid.n_theta()].to_vec();
    let interp_w = values.interpolant();
    let interp_wz = wz.interpolant();
    let interp_wzb = wzb.interpolant();
    Ok(QCMap {
        mu: mu.clone(),
        values,
        wz,
        wzb,
        boundary_trace,
        normalization,
        residual,
        norm_points,
        eval_data: MapEvaluator {
            radius: grid.radius(),
            identity: false,
            interp_w: Some(interp_w),
            interp_wz: Some(interp_wz),
            interp_wzb: Some(interp_wzb),
            laurent: plane.laurent,
            sigma,
            moebius,
        },
    })
}

fn unit(z: Complex64) -> Complex64 {
    z / z.norm()
}

/// Image of the unit circle under the plane solution, from its Laurent tail.
fn boundary_curve(laurent: &[Complex64], n_b: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut gamma = Vec::with_capacity(n_b);
    let mut gamma_d = Vec::with_capacity(n_b);
    for k in 0..n_b {
        let x = 2.0 * std::f64::consts::PI * k as f64 / n_b as f64;
        let e = Complex64::from_polar(1.0, x);
        let mut w = e;
        let mut wd = Complex64::i() * e;
        let mut epow = 1.0 / e;
        for (n, &a) in laurent.iter().enumerate() {
            w += a * epow;
            wd += -Complex64::i() * (n as f64 + 1.0) * a * epow;
            epow /= e;
        }
        gamma.push(w);
        gamma_d.push(wd);
    }
    (gamma, gamma_d)
}

/// Group law on coefficients: the coefficient of `w_nu . w_mu^{-1}`,
/// `lambda = [ (nu - mu)/(1 - nu conj(mu)) w_z / conj(w_z) ] . w_mu^{-1}`.
pub fn group_law(
    nu: &BeltramiCoefficient,
    mu: &BeltramiCoefficient,
    tol: f64,
) -> Result<BeltramiCoefficient, SolveError> {
    if !DiscGrid::same_grid(nu.grid(), mu.grid()) {
        return Err(SolveError::Geometry(GeometryError::GridMismatch));
    }
    if mu.is_zero() {
        return Ok(nu.clone());
    }
    let grid = nu.grid().clone();
    let w = solve_beltrami(mu, Normalization::FixThreePoints, tol)?;
    let q = nu.field().zip_with(mu.field(), |n, m| {
        (n - m) / (Complex64::new(1.0, 0.0) - n * m.conj())
    })?;
    let g = q.zip_with(w.wz(), |q, wz| q * wz / wz.conj())?;
    let g_interp = g.interpolant();
    let radius = grid.radius();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let zeta = grid.node(j, k);
            let p = w.invert(zeta)?;
            if p.norm() > radius {
                out.push(Complex64::new(0.0, 0.0));
            } else {
                out.push(g_interp.eval(p));
            }
        }
    }
    BeltramiCoefficient::new(ComplexField::new(grid, out).map_err(SolveError::Geometry)?)
        .map_err(SolveError::Geometry)
}

/// Right-translation pullback
/// `R(nu, mu) = [ nu / (1 - |mu|^2) w_z / conj(w_z) ] . w_mu^{-1}`.
pub fn right_translation_pullback(
    nu: &TangentField,
    mu: &BeltramiCoefficient,
    tol: f64,
) -> Result<ComplexField, SolveError> {
    if !DiscGrid::same_grid(nu.grid(), mu.grid()) {
        return Err(SolveError::Geometry(GeometryError::GridMismatch));
    }
    if mu.is_zero() {
        return Ok(nu.field().clone());
    }
    let grid = mu.grid().clone();
    let w = solve_beltrami(mu, Normalization::FixThreePoints, tol)?;
    let g = nu.field().zip_with(mu.field(), |n, m| {
        n / (1.0 - m.norm_sqr())
    })?;
    let g = g.zip_with(w.wz(), |g, wz| g * wz / wz.conj())?;
    let g_interp = g.interpolant();
    let radius = grid.radius();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let zeta = grid.node(j, k);
            let p = w.invert(zeta)?;
            if p.norm() > radius {
                // Coefficient vanishes beyond the support; only the tangent
                // direction and the conformal frame twist survive.
                let (_, wz, _) = w.eval_with_derivs(p);
                out.push(nu.eval(p) * wz / wz.conj());
            } else {
                out.push(g_interp.eval(p));
            }
        }
    }
    ComplexField::new(grid, out).map_err(SolveError::Geometry)
}

/// Schwarzian derivative `(f_zz / f_z)_z - (f_zz / f_z)^2 / 2` of a field of
/// holomorphic samples.
pub fn schwarzian(f: &ComplexField) -> Result<ComplexField, SolveError> {
    // The contract is holomorphic samples, so differentiate through the
    // Taylor coefficients: three stacked collocation derivatives would
    // amplify rounding noise far above the accuracy of the samples.
    let grid = f.grid();
    let modes = crate::diff::to_modes(f);
    let n_r = grid.n_r();
    let half = grid.n_theta() / 2;
    let ring_w: Vec<f64> = (0..n_r)
        .map(|j| grid.quad_weights()[grid.idx(j, 0)])
        .collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); half];
    for (m, c) in coeffs.iter_mut().enumerate() {
        let profile = &modes[m * n_r..(m + 1) * n_r];
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..n_r {
            let p = grid.r_nodes()[j].powi(m as i32);
            num += ring_w[j] * p * profile[j];
            den += ring_w[j] * p * p;
        }
        *c = num / den;
    }
    let eval = |z: Complex64, order: u32| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (order as usize..coeffs.len()).rev() {
            let mut fac = 1.0;
            for i in 0..order as usize {
                fac *= (m - i) as f64;
            }
            acc = acc * z + fac * coeffs[m];
        }
        acc
    };
    let f1 = ComplexField::from_fn(grid.clone(), |z| eval(z, 1));
    let min_abs = f1.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let max_abs = f1.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if min_abs < 1e-8 * max_abs {
        return Err(SolveError::VanishingDerivative { min_abs });
    }
    Ok(ComplexField::from_fn(grid.clone(), |z| {
        let d1 = eval(z, 1);
        let d2 = eval(z, 2);
        let d3 = eval(z, 3);
        let q = d2 / d1;
        d3 / d1 - 1.5 * q * q
    }))
}

/// Schwarzian on an annulus grid, for samples with Laurent content (powers
/// of `z` of either sign; the origin is outside the grid).
pub fn schwarzian_annulus(f: &AnnulusField) -> Result<AnnulusField, SolveError> {
    let grid = f.grid().clone();
    let n_r = grid.n_r();
    let n_theta = grid.n_theta();
    // Angular FFT to modal profiles.
    let mut modes = vec![Complex64::new(0.0, 0.0); n_r * n_theta];
    {
        let mut planner = rustfft::FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_theta);
        let mut ring = vec![Complex64::new(0.0, 0.0); n_theta];
        for j in 0..n_r {
            ring.copy_from_slice(&f.values()[j * n_theta..(j + 1) * n_theta]);
            fwd.process(&mut ring);
            for (slot, v) in ring.iter().enumerate() {
                modes[slot * n_r + j] = v / n_theta as f64;
            }
        }
    }
    let half = n_theta as i64 / 2;
    let mut laurent: Vec<(i64, Complex64)> = Vec::new();
    for slot in 0..n_theta {
        if slot == n_theta / 2 {
            continue;
        }
        let m = if (slot as i64) < half {
            slot as i64
        } else {
            slot as i64 - n_theta as i64
        };
        let profile = &modes[slot * n_r..(slot + 1) * n_r];
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..n_r {
            let p = grid.r_nodes()[j].powi(m as i32);
            num += p * profile[j];
            den += p * p;
        }
        laurent.push((m, num / den));
    }
    let eval = |z: Complex64, order: i64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(m, c) in &laurent {
            let mut fac = 1.0;
            for i in 0..order {
                fac *= (m - i) as f64;
            }
            if fac == 0.0 {
                continue;
            }
            acc += fac * c * z.powi((m - order) as i32);
        }
        acc
    };
    let d1_vals: Vec<Complex64> = (0..n_r)
        .flat_map(|j| (0..n_theta).map(move |k| (j, k)))
        .map(|(j, k)| eval(grid.node(j, k), 1))
        .collect();
    let min_abs = d1_vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let max_abs = d1_vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if min_abs < 1e-8 * max_abs {
        return Err(SolveError::VanishingDerivative { min_abs });
    }
    Ok(AnnulusField::from_fn(grid, |z| {
        let d1 = eval(z, 1);
        let d2 = eval(z, 2);
        let d3 = eval(z, 3);
        let q = d2 / d1;
        d3 / d1 - 1.5 * q * q
    }))
}

/// Bers embedding: the Schwarzian of the zero-extended plane solution on an
/// exterior annulus, where the map is conformal and given by its Laurent
/// tail.
pub fn bers_embedding(
    mu: &BeltramiCoefficient,
    exterior: &Arc<AnnulusGrid>,
    tol: f64,
) -> Result<AnnulusField, SolveError> {
    if mu.sup_norm() > 0.3 + 1e-12 {
        return Err(SolveError::NormTooLarge {
            sup: mu.sup_norm(),
            limit: 0.3,
        });
    }
    if mu.is_zero() {
        return Ok(AnnulusField::zeros(exterior.clone()));
    }
    let plane = solve_plane(mu, tol)?;
    let laurent = &plane.laurent;
    let values = AnnulusField::from_fn(exterior.clone(), |z| {
        // w' = 1 - sum (n+1) a_n z^{-n-2}, and the higher derivatives of the
        // Laurent tail; the Schwarzian is Moebius-invariant so the series
        // normalization can be skipped.
        let zi = 1.0 / z;
        let mut w1 = Complex64::new(1.0, 0.0);
        let mut w2 = Complex64::new(0.0, 0.0);
        let mut w3 = Complex64::new(0.0, 0.0);
        let mut zpow = zi * zi; // z^{-n-2}
        for (n, &a) in laurent.iter().enumerate() {
            let nf = n as f64;
            w1 -= (nf + 1.0) * a * zpow;
            w2 += (nf + 1.0) * (nf + 2.0) * a * zpow * zi;
            w3 -= (nf + 1.0) * (nf + 2.0) * (nf + 3.0) * a * zpow * zi * zi;
            zpow *= zi;
        }
        let q = w2 / w1;
        w3 / w1 - 1.5 * q * q
    });
    Ok(values)
}
