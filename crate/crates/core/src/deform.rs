//! Deformation families of harmonic maps and their Lie derivatives.
//!
//! A scenario deforms the source chart by `f^eps` (coefficient `eps nu_f`)
//! and the target disc by `h^eps` (coefficient `eps nu_h`), both disc
//! preserving and three-point normalized; the deformed map is the
//! composition `F^eps = h^eps . F . (f^eps)^{-1}`.  Lie derivatives of a
//! family of `(l, m)`-tensors are measured as central differences of the
//! tensor pullback
//!
//! ```text
//! (f^eps)^*(w^eps) = w^eps . f^eps  (f^eps_z)^l (conj(f^eps)_zbar)^m
//! ```
//!
//! Richardson-extrapolated over a halving ladder of step sizes, and compared
//! against the closed-form first-variation formulas.

use num_complex::Complex64;

use crate::beltrami::{solve_beltrami, BeltramiCoefficient, Normalization, QCMap};
use crate::diff::{d_z, d_zbar};
use crate::differentials::TangentField;
use crate::error::{GeometryError, PipelineError};
use crate::field::ComplexField;
use crate::gauss::ConformalFactor;
use crate::hyperbolic;
use crate::surface::{InducedGaussPair, Sign};

/// Quantities whose Lie derivative the engine can measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LieQuantity {
    /// Beltrami coefficient of `F^eps`, type `(-1, 1)`.
    MuF,
    /// Hopf differential of `F^eps`, type `(2, 0)`.
    Hopf,
    /// Anti-holomorphic energy density, type `(1, 1)`.
    AntiholDensity,
    /// Holomorphic energy density `e^phi`, type `(1, 1)`.
    HolDensity,
    /// Plain epsilon-derivative of the measured coefficient of
    /// `H^eps = h^eps . F` (no pullback).
    MuHDot,
}

impl LieQuantity {
    fn tensor_type(self) -> (i32, i32) {
        match self {
            LieQuantity::MuF => (-1, 1),
            LieQuantity::Hopf => (2, 0),
            LieQuantity::AntiholDensity | LieQuantity::HolDensity => (1, 1),
            LieQuantity::MuHDot => (0, 0),
        }
    }
}

/// An epsilon-deformation family around an induced Gauss pair.
pub struct DeformationScenario<'a> {
    pair: &'a InducedGaussPair,
    nu_source: Option<TangentField>,
    nu_target: Option<TangentField>,
    epsilons: Vec<f64>,
}

impl<'a> DeformationScenario<'a> {
    /// `nu_source` deforms the source chart, `nu_target` the (+) target
    /// disc; the ladder must be positive and halving.
    pub fn new(
        pair: &'a InducedGaussPair,
        nu_source: Option<TangentField>,
        nu_target: Option<TangentField>,
        epsilons: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        if nu_source.is_none() && nu_target.is_none() {
            return Err(GeometryError::InvalidParameter(
                "at least one deformation direction is required".into(),
            ));
        }
        if epsilons.len() < 2 {
            return Err(GeometryError::InvalidParameter(
                "need at least two ladder steps".into(),
            ));
        }
        for w in epsilons.windows(2) {
            if w[0] <= 0.0 || (w[1] / w[0] - 0.5).abs() > 1e-12 {
                return Err(GeometryError::InvalidParameter(
                    "epsilon ladder must be positive and halving".into(),
                ));
            }
        }
        Ok(DeformationScenario {
            pair,
            nu_source,
            nu_target,
            epsilons,
        })
    }

    pub fn pair(&self) -> &InducedGaussPair {
        self.pair
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

/// Result of one Lie-derivative measurement.
pub struct LieReport {
    pub quantity: LieQuantity,
    pub fd_value: ComplexField,
    pub closed_value: ComplexField,
    pub rel_error: f64,
    pub order_estimate: f64,
}

struct EpsMember {
    f_map: Option<QCMap>,
    /// `F^eps` values and grid derivatives.
    f_eps: ComplexField,
    f_eps_z: ComplexField,
    f_eps_zb: ComplexField,
    /// `H^eps = h^eps . F` values.
    h_of_f: ComplexField,
}

/// Shared solves for every quantity of a scenario.
pub struct LieEngine<'a> {
    scenario: DeformationScenario<'a>,
    /// `(eps, member)` for both signs of every ladder step.
    members: Vec<(f64, EpsMember)>,
}

impl<'a> LieEngine<'a> {
    pub fn build(
        scenario: DeformationScenario<'a>,
        tol: f64,
    ) -> Result<LieEngine<'a>, PipelineError> {
        let mut members = Vec::new();
        for &eps in &scenario.epsilons {
            for s in [1.0, -1.0] {
                members.push((s * eps, build_member(&scenario, s * eps, tol)?));
            }
        }
        Ok(LieEngine { scenario, members })
    }

    pub fn scenario(&self) -> &DeformationScenario<'a> {
        &self.scenario
    }

    /// Central-difference Lie derivative with one Richardson step, plus the
    /// measured convergence order of the raw differences.
    pub fn lie_fd(&self, quantity: LieQuantity) -> Result<(ComplexField, f64), PipelineError> {
        let grid = self.scenario.pair.grid().clone();
        let mut diffs: Vec<ComplexField> = Vec::new();
        for &eps in &self.scenario.epsilons {
            let plus = self.member(eps)?;
            let minus = self.member(-eps)?;
            let wp = pulled_quantity(&self.scenario, plus, quantity);
            let wm = pulled_quantity(&self.scenario, minus, quantity);
            let d = wp.zip_with(&wm, |a, b| (a - b) / (2.0 * eps))?;
            diffs.push(d);
        }
        let n = diffs.len();
        // Order estimate from the two coarsest consecutive differences.
        let order = if n >= 3 {
            let d01 = interior_l2(&grid, &diffs[0].sub(&diffs[1])?);
            let d12 = interior_l2(&grid, &diffs[1].sub(&diffs[2])?);
            if d12 > 0.0 {
                (d01 / d12).log2()
            } else {
                2.0
            }
        } else {
            let d = interior_l2(&grid, &diffs[n - 2].sub(&diffs[n - 1])?);
            if d > 0.0 {
                2.0
            } else {
                2.0
            }
        };
        // Richardson on the two finest.
        let fine = &diffs[n - 1];
        let coarse = &diffs[n - 2];
        let extr = fine.zip_with(coarse, |f, c| (4.0 * f - c) / 3.0)?;
        Ok((extr, order))
    }

    /// Full report against a closed-form value.
    pub fn report(
        &self,
        quantity: LieQuantity,
        closed_value: ComplexField,
    ) -> Result<LieReport, PipelineError> {
        let (fd_value, order_estimate) = self.lie_fd(quantity)?;
        let grid = self.scenario.pair.grid().clone();
        let num = interior_l2(&grid, &fd_value.sub(&closed_value)?);
        let den = interior_l2(&grid, &closed_value).max(1e-300);
        Ok(LieReport {
            quantity,
            fd_value,
            closed_value,
            rel_error: num / den,
            order_estimate,
        })
    }

    fn member(&self, eps: f64) -> Result<&EpsMember, PipelineError> {
        self.members
            .iter()
            .find(|(e, _)| *e == eps)
            .map(|(_, m)| m)
            .ok_or_else(|| PipelineError::Scenario(format!("no member for eps = {eps}")))
    }
}

/// Quadrature-weighted L2 norm over the interior band `r <= 0.9 R`.
pub(crate) fn interior_l2(grid: &std::sync::Arc<crate::grid::DiscGrid>, f: &ComplexField) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.n_r() {
        if grid.r_nodes()[j] > 0.9 * grid.radius() {
            continue;
        }
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            acc += f.values()[i].norm_sqr() * grid.quad_weights()[i];
        }
    }
    acc.sqrt()
}

fn build_member(
    scenario: &DeformationScenario,
    eps: f64,
    tol: f64,
) -> Result<EpsMember, PipelineError> {
    let pair = scenario.pair;
    let grid = pair.grid().clone();
    let f_map = match &scenario.nu_source {
        None => None,
        Some(nu) => {
            let mu = BeltramiCoefficient::new(nu.field().scale(Complex64::new(eps, 0.0)))
                .map_err(PipelineError::Geometry)?;
            Some(solve_beltrami(&mu, Normalization::FixThreePoints, tol)?)
        }
    };
    let h_map = match &scenario.nu_target {
        None => None,
        Some(nu) => {
            let mu = BeltramiCoefficient::new(nu.field().scale(Complex64::new(eps, 0.0)))
                .map_err(PipelineError::Geometry)?;
            Some(solve_beltrami(&mu, Normalization::FixThreePoints, tol)?)
        }
    };
    let f_big = pair.f_plus();

    let mut f_eps_vals = Vec::with_capacity(grid.len());
    let mut h_of_f_vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let z = grid.node(j, k);
            let p = match &f_map {
                None => z,
                Some(f) => f.invert(z)?,
            };
            let fp = f_big.eval(p);
            let val = match &h_map {
                None => fp,
                Some(h) => h.eval(fp),
            };
            f_eps_vals.push(val);
            let f_direct = f_big.values().values()[grid.idx(j, k)];
            h_of_f_vals.push(match &h_map {
                None => f_direct,
                Some(h) => h.eval(f_direct),
            });
        }
    }
    let f_eps =
        ComplexField::new(grid.clone(), f_eps_vals).map_err(PipelineError::Geometry)?;
    let h_of_f =
        ComplexField::new(grid.clone(), h_of_f_vals).map_err(PipelineError::Geometry)?;
    let f_eps_z = d_z(&f_eps);
    let f_eps_zb = d_zbar(&f_eps);
    Ok(EpsMember {
        f_map,
        f_eps,
        f_eps_z,
        f_eps_zb,
        h_of_f,
    })
}

/// `(f^eps)^*(w^eps)` for the requested quantity.
fn pulled_quantity(
    scenario: &DeformationScenario,
    member: &EpsMember,
    quantity: LieQuantity,
) -> ComplexField {
    let grid = scenario.pair.grid().clone();
    if quantity == LieQuantity::MuHDot {
        // Measured coefficient of H^eps, no pullback.
        let hz = d_z(&member.h_of_f);
        let hzb = d_zbar(&member.h_of_f);
        return hzb
            .zip_with(&hz, |a, b| a / b)
            .expect("same grid");
    }

    // The raw quantity field on the grid.
    let omega = match quantity {
        LieQuantity::MuF => member
            .f_eps_zb
            .zip_with(&member.f_eps_z, |a, b| a / b)
            .expect("same grid"),
        LieQuantity::Hopf => ComplexField::new(grid.clone(), {
            (0..grid.len())
                .map(|i| {
                    let w = member.f_eps.values()[i];
                    hyperbolic::density_at(w)
                        * member.f_eps_z.values()[i]
                        * member.f_eps_zb.values()[i].conj()
                })
                .collect()
        })
        .expect("layout"),
        LieQuantity::AntiholDensity => ComplexField::new(grid.clone(), {
            (0..grid.len())
                .map(|i| {
                    let w = member.f_eps.values()[i];
                    Complex64::new(
                        hyperbolic::density_at(w) * member.f_eps_zb.values()[i].norm_sqr(),
                        0.0,
                    )
                })
                .collect()
        })
        .expect("layout"),
        LieQuantity::HolDensity => ComplexField::new(grid.clone(), {
            (0..grid.len())
                .map(|i| {
                    let w = member.f_eps.values()[i];
                    Complex64::new(
                        hyperbolic::density_at(w) * member.f_eps_z.values()[i].norm_sqr(),
                        0.0,
                    )
                })
                .collect()
        })
        .expect("layout"),
        LieQuantity::MuHDot => unreachable!(),
    };

    let Some(f) = &member.f_map else {
        return omega;
    };
    let omega_interp = omega.interpolant();
    let (l, m) = quantity.tensor_type();
    let mut vals = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let fz = f.wz().values()[i];
        let w = omega_interp.eval(f.values().values()[i]);
        let mut factor = Complex64::new(1.0, 0.0);
        match l.cmp(&0) {
            std::cmp::Ordering::Greater => factor *= fz.powi(l),
            std::cmp::Ordering::Less => factor /= fz.powi(-l),
            std::cmp::Ordering::Equal => {}
        }
        if m != 0 {
            factor *= fz.conj().powi(m);
        }
        vals.push(w * factor);
    }
    ComplexField::new(grid, vals).expect("layout")
}

/// Pullback of a harmonic tangent direction through a solved map:
/// `F^*(nu) = nu(F(z)) conj(F_z) / F_z`.
pub fn pullback_tangent(f: &QCMap, nu: &TangentField) -> ComplexField {
    let grid = f.grid().clone();
    let mut vals = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let w = f.values().values()[i];
        let fz = f.wz().values()[i];
        vals.push(nu.eval(w) * fz.conj() / fz);
    }
    ComplexField::new(grid, vals).expect("layout")
}

/// A deformation direction on a target disc.
pub enum TargetDirection<'a> {
    /// Harmonic representative with a closed form everywhere.
    Harmonic(&'a TangentField),
    /// A sampled field, interpolated (and clamped) at mapped points.
    Field(&'a ComplexField),
}

/// Pullback of a general target direction.
pub fn pullback_direction(f: &QCMap, dir: &TargetDirection) -> ComplexField {
    match dir {
        TargetDirection::Harmonic(nu) => pullback_tangent(f, nu),
        TargetDirection::Field(field) => {
            let grid = f.grid().clone();
            let interp = field.interpolant();
            let target_radius = field.grid().radius();
            let mut vals = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let w = f.values().values()[i];
                let fz = f.wz().values()[i];
                let v = if w.norm() <= target_radius {
                    interp.eval(w)
                } else {
                    interp.eval(w) // clamped evaluation at the rim
                };
                vals.push(v * fz.conj() / fz);
            }
            ComplexField::new(grid, vals).expect("layout")
        }
    }
}

/// Inverse of the pullback: the target field `nu` with `F^*(nu) = x`.
pub fn unpullback(f: &QCMap, x: &ComplexField) -> Result<ComplexField, PipelineError> {
    let grid = x.grid().clone();
    let interp = x.interpolant();
    let mut vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let t = grid.node(j, k);
            let p = f.invert(t)?;
            let (_, fz, _) = f.eval_with_derivs(p);
            vals.push(interp.eval(p) * fz / fz.conj());
        }
    }
    ComplexField::new(grid, vals).map_err(PipelineError::Geometry)
}

/// Closed form of `L_{nu_f} mu_F = (1 - |mu_F|^2) F^*(nu_h) - (nu_f - conj(nu_f) mu_F^2)`.
pub fn lie_mu_f_closed(
    nu_f: Option<&TangentField>,
    nu_h: Option<&TangentField>,
    f: &QCMap,
    mu_f: &ComplexField,
) -> ComplexField {
    let grid = mu_f.grid().clone();
    let pull = nu_h.map(|nu| pullback_tangent(f, nu));
    let mut vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let mu = mu_f.values()[i];
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(p) = &pull {
                acc += (1.0 - mu.norm_sqr()) * p.values()[i];
            }
            if let Some(nf) = nu_f {
                let v = nf.eval(z);
                acc -= v - v.conj() * mu * mu;
            }
            vals.push(acc);
        }
    }
    ComplexField::new(grid, vals).expect("layout")
}

/// Closed form of `mu_H-dot = nu_f - conj(nu_f) mu_F^2 + L_{nu_f} mu_F`,
/// which collapses to `(1 - |mu_F|^2) F^*(nu_h)`.
pub fn mu_h_dot_closed(
    nu_f: Option<&TangentField>,
    nu_h: Option<&TangentField>,
    f: &QCMap,
    mu_f: &ComplexField,
) -> (ComplexField, ComplexField) {
    let grid = mu_f.grid().clone();
    let lie = lie_mu_f_closed(nu_f, nu_h, f, mu_f);
    let mut via_sum = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let mu = mu_f.values()[i];
            let mut acc = lie.values()[i];
            if let Some(nf) = nu_f {
                let v = nf.eval(z);
                acc += v - v.conj() * mu * mu;
            }
            via_sum.push(acc);
        }
    }
    let via_sum = ComplexField::new(grid.clone(), via_sum).expect("layout");
    let direct = match nu_h {
        None => ComplexField::zeros(grid),
        Some(nu) => {
            let p = pullback_tangent(f, nu);
            p.zip_with(mu_f, |p, mu| (1.0 - mu.norm_sqr()) * p)
                .expect("same grid")
        }
    };
    (via_sum, direct)
}

/// Closed form of the Hopf-differential variation
/// `L_{nu_f} Phi = e^phi (F^*(nu_h) conj(mu_F)^2 - conj(nu_f) |mu_F|^2)
///              + e^phi (conj(F^*(nu_h)) - conj(nu_f))`.
pub fn lie_hopf_closed(
    nu_f: Option<&TangentField>,
    nu_h: Option<&TangentField>,
    f: &QCMap,
    mu_f: &ComplexField,
    phi: &ConformalFactor,
) -> ComplexField {
    let grid = mu_f.grid().clone();
    let pull = nu_h.map(|nu| pullback_tangent(f, nu));
    let mut vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let mu = mu_f.values()[i];
            let e_phi = phi.phi().values()[i].exp();
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(p) = &pull {
                let pv = p.values()[i];
                acc += e_phi * (pv * mu.conj() * mu.conj() + pv.conj());
            }
            if let Some(nf) = nu_f {
                let v = nf.eval(z).conj();
                acc -= e_phi * (v * mu.norm_sqr() + v);
            }
            vals.push(acc);
        }
    }
    ComplexField::new(grid, vals).expect("layout")
}

/// Closed form shared by the holomorphic and anti-holomorphic energy-density
/// variations: `Phi (F^*(nu_h) - nu_f) + conj(Phi) (conj(F^*(nu_h)) - conj(nu_f))`.
pub fn lie_energy_density_closed(
    nu_f: Option<&TangentField>,
    nu_h: Option<&TangentField>,
    f: &QCMap,
    pair: &InducedGaussPair,
) -> ComplexField {
    let grid = pair.grid().clone();
    let pull = nu_h.map(|nu| pullback_tangent(f, nu));
    let mut vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let quad = pair.quad().eval(z);
            let mut dir = Complex64::new(0.0, 0.0);
            if let Some(p) = &pull {
                dir += p.values()[i];
            }
            if let Some(nf) = nu_f {
                dir -= nf.eval(z);
            }
            let t = quad * dir;
            vals.push(t + t.conj());
        }
    }
    ComplexField::new(grid, vals).expect("layout")
}

/// First variations of the cotangent data along target-side directions
/// (`nu_plus` on the `+` disc, `nu_minus` on the `-` disc):
///
/// ```text
/// delta mu  = (P+ + P-)/2 (1+|mu|^2)^{-1} + conj(P+ + P-) mu^2 / 2 (1+|mu|^2)^{-1}
/// delta Phi = e^phi [ (P+ - P-) conj(mu)^2 + conj(P+ - P-) ] / 2
/// ```
///
/// with `P± = F_±^*(nu_±)`.
pub fn pm_variations(
    nu_plus: Option<&TargetDirection>,
    nu_minus: Option<&TargetDirection>,
    pair: &InducedGaussPair,
) -> (ComplexField, ComplexField) {
    let grid = pair.grid().clone();
    let p_plus = nu_plus.map(|d| pullback_direction(pair.f_plus(), d));
    let p_minus = nu_minus.map(|d| pullback_direction(pair.f_minus(), d));
    let zero = ComplexField::zeros(grid.clone());
    let pp = p_plus.as_ref().unwrap_or(&zero);
    let pm = p_minus.as_ref().unwrap_or(&zero);
    let mut dmu = Vec::with_capacity(grid.len());
    let mut dphi = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let mu = pair.mu_plus().field().values()[i];
        let e_phi = pair.phi().phi().values()[i].exp();
        let sum = pp.values()[i] + pm.values()[i];
        let diff = pp.values()[i] - pm.values()[i];
        dmu.push(0.5 / (1.0 + mu.norm_sqr()) * (sum + sum.conj() * mu * mu));
        dphi.push(0.5 * e_phi * (diff * mu.conj() * mu.conj() + diff.conj()));
    }
    (
        ComplexField::new(grid.clone(), dmu).expect("layout"),
        ComplexField::new(grid, dphi).expect("layout"),
    )
}

/// `2 int e^phi nu conj(mu_F) d^2 z`, the holomorphic first variation of the
/// doubled anti-holomorphic energy along a one-sided deformation with source
/// coefficient `nu`.
pub fn energy_first_variation(nu: &ComplexField, pair: &InducedGaussPair) -> Complex64 {
    let grid = pair.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let e_phi = pair.phi().phi().values()[i].exp();
        let mu = pair.mu_plus().field().values()[i];
        acc += 2.0 * e_phi * nu.values()[i] * mu.conj() * grid.quad_weights()[i];
    }
    acc
}

/// `2 int e^phi (1 + |mu_F|^2) nu conj(mu) d^2 z`, the Hessian pairing of the
/// doubled anti-holomorphic energy.
pub fn energy_second_variation(
    nu: &ComplexField,
    mu: &ComplexField,
    pair: &InducedGaussPair,
) -> Complex64 {
    let grid = pair.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let e_phi = pair.phi().phi().values()[i].exp();
        let m_f = pair.mu_plus().field().values()[i].norm_sqr();
        acc += 2.0
            * e_phi
            * (1.0 + m_f)
            * nu.values()[i]
            * mu.values()[i].conj()
            * grid.quad_weights()[i];
    }
    acc
}

/// One-sided energy variation by a full finite-difference family: deform the
/// `sign` target by `eps nu_target` (harmonic), the source by the induced
/// `eps delta-mu`, and difference
/// `E(eps) = int (f^eps)^*(antihol density of F^eps) (1 - eps^2 |nu_f|^2)`.
/// Returns `(fd, closed)` where `closed = Re(energy_first_variation(delta-mu))`.
pub fn energy_variation_fd(
    pair: &InducedGaussPair,
    nu_target: &TangentField,
    sign: Sign,
    epsilons: &[f64],
    tol: f64,
) -> Result<(f64, f64), PipelineError> {
    let grid = pair.grid().clone();
    let dir = TargetDirection::Harmonic(nu_target);
    let (delta_mu, _) = match sign {
        Sign::Plus => pm_variations(Some(&dir), None, pair),
        Sign::Minus => pm_variations(None, Some(&dir), pair),
    };
    let f_big = pair.f(sign);

    let e_of = |eps: f64| -> Result<f64, PipelineError> {
        let mu_f_eps = BeltramiCoefficient::new(delta_mu.scale(Complex64::new(eps, 0.0)))
            .map_err(PipelineError::Geometry)?;
        let f_eps = solve_beltrami(&mu_f_eps, Normalization::FixThreePoints, tol)?;
        let mu_h = BeltramiCoefficient::new(nu_target.field().scale(Complex64::new(eps, 0.0)))
            .map_err(PipelineError::Geometry)?;
        let h_eps = solve_beltrami(&mu_h, Normalization::FixThreePoints, tol)?;
        // F^eps on the grid.
        let mut vals = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for k in 0..grid.n_theta() {
                let z = grid.node(j, k);
                let p = f_eps.invert(z)?;
                vals.push(h_eps.eval(f_big.eval(p)));
            }
        }
        let f_field = ComplexField::new(grid.clone(), vals).map_err(PipelineError::Geometry)?;
        let fzb = d_zbar(&f_field);
        let density = ComplexField::new(grid.clone(), {
            (0..grid.len())
                .map(|i| {
                    Complex64::new(
                        hyperbolic::density_at(f_field.values()[i]) * fzb.values()[i].norm_sqr(),
                        0.0,
                    )
                })
                .collect()
        })
        .map_err(PipelineError::Geometry)?;
        let dens_interp = density.interpolant();
        let mut acc = 0.0;
        for i in 0..grid.len() {
            let fz = f_eps.wz().values()[i];
            let w = dens_interp.eval(f_eps.values().values()[i]).re;
            let area = fz.norm_sqr() * (1.0 - eps * eps * delta_mu.values()[i].norm_sqr());
            acc += w * area * grid.quad_weights()[i];
        }
        Ok(acc)
    };

    let mut diffs = Vec::new();
    for &eps in epsilons {
        let ep = e_of(eps)?;
        let em = e_of(-eps)?;
        diffs.push((ep - em) / (2.0 * eps));
    }
    let n = diffs.len();
    let fd = (4.0 * diffs[n - 1] - diffs[n - 2]) / 3.0;
    let closed = energy_first_variation(&delta_mu, pair).re;
    Ok((fd, closed))
}

/// First-variation identity of the hyperbolic density under a normalized
/// disc deformation with harmonic coefficient (Ahlfors):
/// `psi_u V + psi_ubar conj(V) + V_u + conj(V)_ubar = 0` for the measured
/// generator `V = (h^eps - h^{-eps}) / 2 eps`.  Returns the interior sup of
/// the defect.
pub fn ahlfors_defect(
    nu: &TangentField,
    eps: f64,
    tol: f64,
) -> Result<f64, PipelineError> {
    let grid = nu.grid().clone();
    let solve = |e: f64| -> Result<QCMap, PipelineError> {
        let mu = BeltramiCoefficient::new(nu.field().scale(Complex64::new(e, 0.0)))
            .map_err(PipelineError::Geometry)?;
        Ok(solve_beltrami(&mu, Normalization::FixThreePoints, tol)?)
    };
    let hp = solve(eps)?;
    let hm = solve(-eps)?;
    let v = hp
        .values()
        .zip_with(hm.values(), |a, b| (a - b) / (2.0 * eps))?;
    let vz = d_z(&v);
    let mut worst = 0.0f64;
    for j in 0..grid.n_r() {
        if grid.r_nodes()[j] > 0.9 * grid.radius() {
            continue;
        }
        for k in 0..grid.n_theta() {
            let i = grid.idx(j, k);
            let z = grid.node(j, k);
            let psi_u = hyperbolic::psi_w_at(z);
            let defect = 2.0 * (psi_u * v.values()[i]).re + 2.0 * vz.values()[i].re;
            worst = worst.max(defect.abs());
        }
    }
    Ok(worst)
}

/// Evaluates a target-direction interpolant helper used by tests and the
/// symplectic module.
pub fn scale_to_sup(nu: &TangentField, sup: f64) -> TangentField {
    let current = nu.field().sup_norm();
    nu.scale(Complex64::new(sup / current, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differentials::QuadDifferential;
    use crate::gauss::solve_gauss;
    use crate::grid::cached_grid;
    use crate::surface::build_pair;
    use std::sync::{Arc, OnceLock};

    fn grid() -> Arc<crate::grid::DiscGrid> {
        cached_grid(64, 128, 0.9).unwrap()
    }

    fn pair() -> &'static InducedGaussPair {
        static PAIR: OnceLock<InducedGaussPair> = OnceLock::new();
        PAIR.get_or_init(|| {
            let quad = QuadDifferential::new(vec![
                Complex64::new(0.1, 0.0),
                Complex64::new(0.05, 0.02),
            ])
            .unwrap();
            let phi = solve_gauss(&quad, &grid(), 1e-11).unwrap();
            build_pair(phi, quad, 1e-10).unwrap()
        })
    }

    fn nu_f() -> TangentField {
        scale_to_sup(
            &TangentField::new(
                &grid(),
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
            )
            .unwrap(),
            0.1,
        )
    }

    fn nu_h() -> TangentField {
        scale_to_sup(
            &TangentField::new(
                &grid(),
                vec![Complex64::new(0.4, -0.6), Complex64::new(0.7, 0.0)],
            )
            .unwrap(),
            0.1,
        )
    }

    fn ladder() -> Vec<f64> {
        vec![0.02, 0.01, 0.005]
    }

    fn engine_both() -> &'static LieEngine<'static> {
        static CELL: OnceLock<LieEngine<'static>> = OnceLock::new();
        CELL.get_or_init(|| {
            let scn =
                DeformationScenario::new(pair(), Some(nu_f()), Some(nu_h()), ladder()).unwrap();
            LieEngine::build(scn, 1e-10).unwrap()
        })
    }

    #[test]
    fn zero_directions_are_rejected() {
        assert!(DeformationScenario::new(pair(), None, None, ladder()).is_err());
    }

    #[test]
    fn lie_mu_f_matches_closed_form() {
        let engine = engine_both();
        let closed = lie_mu_f_closed(
            Some(&nu_f()),
            Some(&nu_h()),
            pair().f_plus(),
            pair().mu_plus().field(),
        );
        let report = engine.report(LieQuantity::MuF, closed).unwrap();
        assert!(report.rel_error < 1e-3, "rel {}", report.rel_error);
        assert!(
            (report.order_estimate - 2.0).abs() < 0.5,
            "order {}",
            report.order_estimate
        );
    }

    #[test]
    fn target_only_variation_matches_key_lemma() {
        // nu_f = 0: L mu_F = (1 - |mu_F|^2) F^*(nu_h).
        let scn = DeformationScenario::new(pair(), None, Some(nu_h()), ladder()).unwrap();
        let engine = LieEngine::build(scn, 1e-10).unwrap();
        let closed = lie_mu_f_closed(None, Some(&nu_h()), pair().f_plus(), pair().mu_plus().field());
        let report = engine.report(LieQuantity::MuF, closed).unwrap();
        assert!(report.rel_error < 1e-3, "rel {}", report.rel_error);
    }

    #[test]
    fn mu_h_dot_expressions_agree_and_match_fd() {
        let engine = engine_both();
        let (via_sum, direct) = mu_h_dot_closed(
            Some(&nu_f()),
            Some(&nu_h()),
            pair().f_plus(),
            pair().mu_plus().field(),
        );
        let alg = via_sum.sub(&direct).unwrap().sup_norm();
        assert!(alg < 1e-10, "algebraic identity {alg}");
        let report = engine.report(LieQuantity::MuHDot, direct).unwrap();
        assert!(report.rel_error < 1e-3, "rel {}", report.rel_error);
    }

    #[test]
    fn hopf_variation_matches_closed_form() {
        let engine = engine_both();
        let closed = lie_hopf_closed(
            Some(&nu_f()),
            Some(&nu_h()),
            pair().f_plus(),
            pair().mu_plus().field(),
            pair().phi(),
        );
        let report = engine.report(LieQuantity::Hopf, closed).unwrap();
        assert!(report.rel_error < 2e-3, "rel {}", report.rel_error);
    }

    #[test]
    fn energy_density_variations_match_closed_form() {
        let engine = engine_both();
        let closed = lie_energy_density_closed(
            Some(&nu_f()),
            Some(&nu_h()),
            pair().f_plus(),
            pair(),
        );
        // The closed form is real.
        let im_sup = closed
            .values()
            .iter()
            .map(|v| v.im.abs())
            .fold(0.0, f64::max);
        assert!(im_sup < 1e-10);
        let r1 = engine
            .report(LieQuantity::AntiholDensity, closed.clone())
            .unwrap();
        assert!(r1.rel_error < 2e-3, "antihol rel {}", r1.rel_error);
        let r2 = engine.report(LieQuantity::HolDensity, closed).unwrap();
        assert!(r2.rel_error < 2e-3, "hol rel {}", r2.rel_error);
    }

    #[test]
    fn pm_variations_reductions() {
        // At Phi = 0 (identity maps): nu_+ = nu_- = nu makes delta Phi
        // vanish, and a one-sided nu gives delta mu = nu/2,
        // delta Phi = e^psi conj(nu)/2.
        let g = grid();
        let phi = solve_gauss(&QuadDifferential::zero(), &g, 1e-10).unwrap();
        let p0 = build_pair(phi, QuadDifferential::zero(), 1e-10).unwrap();
        let nu = nu_h();
        let dir = TargetDirection::Harmonic(&nu);
        let (dmu, dphi) = pm_variations(Some(&dir), Some(&dir), &p0);
        assert!(dphi.sup_norm() < 1e-13, "{}", dphi.sup_norm());
        let dev = dmu.sub(nu.field()).unwrap().sup_norm();
        assert!(dev < 1e-13, "diagonal delta mu {dev}");

        let (dmu1, dphi1) = pm_variations(Some(&dir), None, &p0);
        let want_mu = nu.field().scale(Complex64::new(0.5, 0.0));
        assert!(dmu1.sub(&want_mu).unwrap().sup_norm() < 1e-13);
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let z = g.node(j, k);
                let want = 0.5 * hyperbolic::density_at(z) * nu.field().values()[i].conj();
                worst = worst.max((dphi1.values()[i] - want).norm());
            }
        }
        assert!(worst < 1e-13, "one-sided delta Phi {worst}");
    }

    #[test]
    fn pm_delta_mu_matches_measured_compatible_source() {
        // Construct h_pm^eps from target directions, measure the coefficient
        // derivative of H_pm = hّ_pm . F_pm, and recover the compatible
        // source direction from the summed key-lemma relations.
        let p = pair();
        let g = grid();
        let nup = nu_h();
        let num = scale_to_sup(
            &TangentField::new(&g, vec![Complex64::new(0.0, 0.8), Complex64::new(-0.3, 0.0)])
                .unwrap(),
            0.1,
        );
        let dirp = TargetDirection::Harmonic(&nup);
        let dirm = TargetDirection::Harmonic(&num);
        let (dmu, _) = pm_variations(Some(&dirp), Some(&dirm), p);

        let eps = 0.005f64;
        let measure = |f_map: &QCMap, nu: &TangentField, e: f64| -> ComplexField {
            let mu = BeltramiCoefficient::new(nu.field().scale(Complex64::new(e, 0.0))).unwrap();
            let h = solve_beltrami(&mu, Normalization::FixThreePoints, 1e-10).unwrap();
            let vals: Vec<Complex64> = (0..g.len())
                .map(|i| h.eval(f_map.values().values()[i]))
                .collect();
            let field = ComplexField::new(g.clone(), vals).unwrap();
            let hz = d_z(&field);
            let hzb = d_zbar(&field);
            hzb.zip_with(&hz, |a, b| a / b).unwrap()
        };
        let dot_plus = measure(p.f_plus(), &nup, eps)
            .zip_with(&measure(p.f_plus(), &nup, -eps), |a, b| {
                (a - b) / (2.0 * eps)
            })
            .unwrap();
        let dot_minus = measure(p.f_minus(), &num, eps)
            .zip_with(&measure(p.f_minus(), &num, -eps), |a, b| {
                (a - b) / (2.0 * eps)
            })
            .unwrap();
        // X = nu_f - conj(nu_f) mu^2, from (dot_+ + dot_-)/2.
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            if g.r_nodes()[j] > 0.9 * g.radius() {
                continue;
            }
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let mu = p.mu_plus().field().values()[i];
                let x = 0.5 * (dot_plus.values()[i] + dot_minus.values()[i]);
                let nu_f = (x + x.conj() * mu * mu) / (1.0 - mu.norm_sqr() * mu.norm_sqr());
                worst = worst.max((nu_f - dmu.values()[i]).norm());
            }
        }
        assert!(worst < 2e-3, "compatible source recovery {worst}");
    }

    #[test]
    fn energy_variation_trivial_and_reduced_cases() {
        // Phi = 0: first variation vanishes.
        let g = grid();
        let phi = solve_gauss(&QuadDifferential::zero(), &g, 1e-10).unwrap();
        let p0 = build_pair(phi, QuadDifferential::zero(), 1e-10).unwrap();
        let nu = nu_f();
        let v = energy_first_variation(nu.field(), &p0);
        assert!(v.norm() < 1e-14);
        // Second variation at Phi = 0 reduces to 2 <nu, nu>_WP.
        let s = energy_second_variation(nu.field(), nu.field(), &p0);
        let wp = crate::differentials::wp_inner(&nu, &nu).unwrap();
        assert!((s - 2.0 * wp).norm() < 1e-12 * s.norm());
    }

    #[test]
    fn energy_fd_matches_first_variation() {
        let p = pair();
        let nu = nu_h();
        let (fd, closed) = energy_variation_fd(p, &nu, Sign::Plus, &[0.02, 0.01], 1e-10).unwrap();
        let rel = (fd - closed).abs() / closed.abs().max(1e-12);
        assert!(rel < 5e-3, "energy fd {fd} vs closed {closed} (rel {rel})");
    }

    #[test]
    fn ahlfors_identity_holds() {
        let nu = nu_h();
        let defect = ahlfors_defect(&nu, 0.01, 1e-10).unwrap();
        assert!(defect < 2e-3, "Ahlfors defect {defect}");
    }
}
