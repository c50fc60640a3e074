//! The Mess correspondence: from a cotangent point `(mu, Phi)` to the pair
//! of target Beltrami coefficients and boundary traces of `z_pm = F_pm . z`,
//! and its pointwise algebraic inversion.

use std::sync::Arc;

use num_complex::Complex64;

use crate::beltrami::{solve_beltrami, BeltramiCoefficient, Normalization, QCMap};
use crate::differentials::QuadDifferential;
use crate::error::MessError;
use crate::field::ComplexField;
use crate::gauss::solve_gauss;
use crate::grid::DiscGrid;
use crate::surface::{build_pair, InducedGaussPair, Sign};

/// A point of the cotangent bundle: base coefficient and quadratic
/// differential, with their finiteness norms.
pub struct CotangentPoint {
    mu_base: BeltramiCoefficient,
    quad: QuadDifferential,
    wp_norm_mu: f64,
    a2_norm_phi: f64,
}

impl CotangentPoint {
    pub fn new(
        mu_base: BeltramiCoefficient,
        quad: QuadDifferential,
    ) -> Result<Self, MessError> {
        if mu_base.sup_norm() > crate::beltrami::SUP_NORM_LIMIT + 1e-12 {
            return Err(MessError::NormViolation {
                sup: mu_base.sup_norm(),
            });
        }
        let grid = mu_base.grid().clone();
        let wp_norm_mu = mu_base.wp_norm();
        let a2_norm_phi = quad.a2_norm(&grid);
        if !wp_norm_mu.is_finite() || !a2_norm_phi.is_finite() {
            return Err(MessError::NormViolation { sup: f64::INFINITY });
        }
        Ok(CotangentPoint {
            mu_base,
            quad,
            wp_norm_mu,
            a2_norm_phi,
        })
    }

    pub fn mu_base(&self) -> &BeltramiCoefficient {
        &self.mu_base
    }

    pub fn quad(&self) -> &QuadDifferential {
        &self.quad
    }

    pub fn wp_norm_mu(&self) -> f64 {
        self.wp_norm_mu
    }

    pub fn a2_norm_phi(&self) -> f64 {
        self.a2_norm_phi
    }
}

/// Image of the Mess map: target coefficients and boundary angle traces.
pub struct MessImage {
    mu_plus_target: BeltramiCoefficient,
    mu_minus_target: BeltramiCoefficient,
    trace_plus: Vec<f64>,
    trace_minus: Vec<f64>,
}

impl MessImage {
    pub fn mu_plus_target(&self) -> &BeltramiCoefficient {
        &self.mu_plus_target
    }

    pub fn mu_minus_target(&self) -> &BeltramiCoefficient {
        &self.mu_minus_target
    }

    pub fn trace_plus(&self) -> &[f64] {
        &self.trace_plus
    }

    pub fn trace_minus(&self) -> &[f64] {
        &self.trace_minus
    }

    /// Strict monotonicity of a trace modulo 2 pi.
    pub fn traces_monotone(&self) -> bool {
        monotone_mod_2pi(&self.trace_plus) && monotone_mod_2pi(&self.trace_minus)
    }
}

fn monotone_mod_2pi(angles: &[f64]) -> bool {
    let n = angles.len();
    let mut total = 0.0;
    for k in 0..n {
        let mut d = angles[(k + 1) % n] - angles[k];
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

/// Forward data: the image plus every intermediate object, kept for the
/// inversion roundtrip and the variational checks.
pub struct MessForwardData {
    image: MessImage,
    pair: InducedGaussPair,
    chart: QCMap,
    /// `z^*(mu_{F_+})` on the base chart, the `b`-variable of the inversion.
    pullback_mu_f: ComplexField,
}

impl MessForwardData {
    pub fn image(&self) -> &MessImage {
        &self.image
    }

    pub fn pair(&self) -> &InducedGaussPair {
        &self.pair
    }

    pub fn chart(&self) -> &QCMap {
        &self.chart
    }

    pub fn pullback_mu_f(&self) -> &ComplexField {
        &self.pullback_mu_f
    }
}

/// Forward Mess map through the harmonic-map route: solve the Gauss equation
/// on the chart of `mu`, build `F_pm`, and compose coefficients through the
/// group law `mu_{z_pm} = (mu +- z^*(mu_{F_+})) / (1 +- conj(mu) z^*(mu_{F_+}))`.
pub fn mess_forward(
    point: &CotangentPoint,
    tol: f64,
) -> Result<MessForwardData, MessError> {
    let grid = point.mu_base.grid().clone();
    let phi = solve_gauss(&point.quad, &grid, tol)?;
    let pair = build_pair(phi, point.quad.clone(), tol)?;
    let chart = solve_beltrami(&point.mu_base, Normalization::FixThreePoints, tol)?;

    // b = z^*(mu_{F_+}): closed-form coefficient at the mapped points.
    let mut b_vals = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let w = chart.values().values()[i];
        let mu_f = point.quad.eval(w).conj() * pair.phi().exp_neg_phi_at(w);
        let wz = chart.wz().values()[i];
        b_vals.push(mu_f * wz.conj() / wz);
    }
    let b_field = ComplexField::new(grid.clone(), b_vals).map_err(MessError::Geometry)?;

    let compose = |sign: f64| -> Result<BeltramiCoefficient, MessError> {
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let m = point.mu_base.field().values()[i];
                let b = sign * b_field.values()[i];
                (m + b) / (Complex64::new(1.0, 0.0) + m.conj() * b)
            })
            .collect();
        let f = ComplexField::new(grid.clone(), vals).map_err(MessError::Geometry)?;
        let sup = f.sup_norm();
        if sup >= 1.0 {
            return Err(MessError::NormViolation { sup });
        }
        BeltramiCoefficient::new(f).map_err(MessError::Geometry)
    };
    let mu_plus_target = compose(1.0)?;
    let mu_minus_target = compose(-1.0)?;

    // Boundary traces of z_pm = F_pm . z along the outermost ring.
    let mut trace_plus = Vec::with_capacity(grid.n_theta());
    let mut trace_minus = Vec::with_capacity(grid.n_theta());
    for w in chart.boundary_trace() {
        trace_plus.push(pair.f_plus().eval(*w).arg());
        trace_minus.push(pair.f_minus().eval(*w).arg());
    }

    Ok(MessForwardData {
        image: MessImage {
            mu_plus_target,
            mu_minus_target,
            trace_plus,
            trace_minus,
        },
        pair,
        chart,
        pullback_mu_f: b_field,
    })
}

/// Nodewise inversion of
/// `A = (a + b)/(1 + conj(a) b)`, `B = (a - b)/(1 - conj(a) b)`
/// by a four-real-dimensional Newton iteration; admissible solutions must
/// satisfy `|a| < 1`, `|b| < 1`.
pub fn mess_pointwise_invert(
    a_target: &ComplexField,
    b_target: &ComplexField,
    tol: f64,
) -> Result<(ComplexField, ComplexField), MessError> {
    if !DiscGrid::same_grid(a_target.grid(), b_target.grid()) {
        return Err(MessError::Geometry(
            crate::error::GeometryError::GridMismatch,
        ));
    }
    let grid = a_target.grid().clone();
    let mut a_out = Vec::with_capacity(grid.len());
    let mut b_out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let cap_a = a_target.values()[i];
        let cap_b = b_target.values()[i];
        let seed = (0.5 * (cap_a + cap_b), 0.5 * (cap_a - cap_b));
        let (a, b) = match newton_node(cap_a, cap_b, seed, tol) {
            Some(sol) => sol,
            None => return Err(MessError::PointwiseDivergence { node: i }),
        };
        if a.norm() >= 1.0 || b.norm() >= 1.0 {
            return Err(MessError::PointwiseDivergence { node: i });
        }
        // Probe the reflected branch; a second admissible root within
        // tolerance means the tolerance cannot separate the branches.
        if b.norm() > 1e-6 {
            let seed2 = (a, b / b.norm_sqr());
            if let Some((a2, b2)) = newton_node(cap_a, cap_b, seed2, tol) {
                if a2.norm() < 1.0
                    && b2.norm() < 1.0
                    && ((a2 - a).norm() > 100.0 * tol || (b2 - b).norm() > 100.0 * tol)
                {
                    return Err(MessError::NonUniqueCandidate { node: i });
                }
            }
        }
        a_out.push(a);
        b_out.push(b);
    }
    Ok((
        ComplexField::new(grid.clone(), a_out).map_err(MessError::Geometry)?,
        ComplexField::new(grid, b_out).map_err(MessError::Geometry)?,
    ))
}

fn newton_node(
    cap_a: Complex64,
    cap_b: Complex64,
    seed: (Complex64, Complex64),
    tol: f64,
) -> Option<(Complex64, Complex64)> {
    let one = Complex64::new(1.0, 0.0);
    let (mut a, mut b) = seed;
    for _ in 0..60 {
        let g1 = a + b - cap_a * (one + a.conj() * b);
        let g2 = a - b - cap_b * (one - a.conj() * b);
        if g1.norm() + g2.norm() < tol {
            return Some((a, b));
        }
        // Wirtinger blocks: dG = G_a da + G_abar conj(da) + G_b db.
        let g1_a = one;
        let g1_ab = -cap_a * b;
        let g1_b = one - cap_a * a.conj();
        let g2_a = one;
        let g2_ab = cap_b * b;
        let g2_b = -one + cap_b * a.conj();
        // Real 4x4 system in (Re a, Im a, Re b, Im b).
        let mut m = [[0.0f64; 4]; 4];
        let mut rhs = [0.0f64; 4];
        let i = Complex64::i();
        let cols1 = [g1_a + g1_ab, i * (g1_a - g1_ab), g1_b, i * g1_b];
        let cols2 = [g2_a + g2_ab, i * (g2_a - g2_ab), g2_b, i * g2_b];
        for c in 0..4 {
            m[0][c] = cols1[c].re;
            m[1][c] = cols1[c].im;
            m[2][c] = cols2[c].re;
            m[3][c] = cols2[c].im;
        }
        rhs[0] = -g1.re;
        rhs[1] = -g1.im;
        rhs[2] = -g2.re;
        rhs[3] = -g2.im;
        let sol = solve4(&mut m, &mut rhs)?;
        a += Complex64::new(sol[0], sol[1]);
        b += Complex64::new(sol[2], sol[3]);
    }
    let g1 = a + b - cap_a * (one + a.conj() * b);
    let g2 = a - b - cap_b * (one - a.conj() * b);
    if g1.norm() + g2.norm() < tol {
        Some((a, b))
    } else {
        None
    }
}

fn solve4(m: &mut [[f64; 4]; 4], rhs: &mut [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let mut piv = col;
        for r in (col + 1)..4 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..4 {
            let f = m[r][col] / m[col][col];
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0f64; 4];
    for r in (0..4).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..4 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

/// Constructs a cotangent point on the section where the `sign.opposite()`
/// target is trivial: the chart map is `F_opposite^{-1}`, whose coefficient
/// is measured from the solved map.
pub fn section_point(
    quad: &QuadDifferential,
    grid: &Arc<DiscGrid>,
    sign: Sign,
    tol: f64,
) -> Result<(CotangentPoint, InducedGaussPair), MessError> {
    let phi = solve_gauss(quad, grid, tol)?;
    let pair = build_pair(phi, quad.clone(), tol)?;
    let (f, s_op) = match sign {
        Sign::Plus => (pair.f_minus(), Sign::Minus.factor()),
        Sign::Minus => (pair.f_plus(), Sign::Plus.factor()),
    };
    // mu of f^{-1}: [-mu_f w_z / conj(w_z)] . f^{-1}, coefficient in closed
    // form at the preimage points.
    let mut vals = Vec::with_capacity(grid.len());
    for j in 0..grid.n_r() {
        for k in 0..grid.n_theta() {
            let zeta = grid.node(j, k);
            let p = f.invert(zeta).map_err(MessError::Solve)?;
            let (_, wz, _) = f.eval_with_derivs(p);
            let mu_f = s_op * quad.eval(p).conj() * pair.phi().exp_neg_phi_at(p);
            vals.push(-mu_f * wz / wz.conj());
        }
    }
    let field = ComplexField::new(grid.clone(), vals).map_err(MessError::Geometry)?;
    let mu_base = BeltramiCoefficient::new(field).map_err(MessError::Geometry)?;
    let point = CotangentPoint::new(mu_base, quad.clone())?;
    Ok((point, pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cached_grid, make_grid};
    use std::sync::OnceLock;

    fn grid() -> Arc<DiscGrid> {
        cached_grid(64, 128, 0.9).unwrap()
    }

    fn test_quad() -> QuadDifferential {
        QuadDifferential::new(vec![Complex64::new(0.1, 0.0), Complex64::new(0.05, 0.02)])
            .unwrap()
    }

    fn base_mu() -> BeltramiCoefficient {
        // 0.1 zbar: a radial-modulus coefficient within the solver regime.
        BeltramiCoefficient::from_fn(grid(), |z| 0.1 * z.conj()).unwrap()
    }

    fn forward_fixture() -> &'static MessForwardData {
        static DATA: OnceLock<MessForwardData> = OnceLock::new();
        DATA.get_or_init(|| {
            let p = CotangentPoint::new(base_mu(), test_quad()).unwrap();
            mess_forward(&p, 1e-10).unwrap()
        })
    }

    #[test]
    fn origin_maps_to_diagonal_origin() {
        let p = CotangentPoint::new(
            BeltramiCoefficient::zero(grid()),
            QuadDifferential::zero(),
        )
        .unwrap();
        let data = mess_forward(&p, 1e-10).unwrap();
        assert_eq!(data.image().mu_plus_target().sup_norm(), 0.0);
        assert_eq!(data.image().mu_minus_target().sup_norm(), 0.0);
        for (a, b) in data
            .image()
            .trace_plus()
            .iter()
            .zip(data.image().trace_minus())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fiber_point_maps_to_antidiagonal() {
        // (0, Phi): targets are exactly +-mu_F.
        let p = CotangentPoint::new(BeltramiCoefficient::zero(grid()), test_quad()).unwrap();
        let data = mess_forward(&p, 1e-10).unwrap();
        let dev_p = data
            .image()
            .mu_plus_target()
            .field()
            .sub(data.pair().mu_plus().field())
            .unwrap()
            .sup_norm();
        let dev_m = data
            .image()
            .mu_minus_target()
            .field()
            .sub(data.pair().mu_minus().field())
            .unwrap()
            .sup_norm();
        assert!(dev_p < 1e-6, "{dev_p}");
        assert!(dev_m < 1e-6, "{dev_m}");
    }

    #[test]
    fn diagonal_law_for_zero_hopf_data() {
        // (mu, 0): both targets coincide and traces agree.
        let p = CotangentPoint::new(base_mu(), QuadDifferential::zero()).unwrap();
        let data = mess_forward(&p, 1e-10).unwrap();
        let dev = data
            .image()
            .mu_plus_target()
            .field()
            .sub(data.image().mu_minus_target().field())
            .unwrap()
            .sup_norm();
        assert!(dev < 1e-12, "{dev}");
        for (a, b) in data
            .image()
            .trace_plus()
            .iter()
            .zip(data.image().trace_minus())
        {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn traces_are_monotone() {
        assert!(forward_fixture().image().traces_monotone());
    }

    #[test]
    fn forward_is_deterministic() {
        let p = CotangentPoint::new(base_mu(), test_quad()).unwrap();
        let d1 = mess_forward(&p, 1e-10).unwrap();
        let d2 = mess_forward(&p, 1e-10).unwrap();
        assert_eq!(
            d1.image().mu_plus_target().field().values(),
            d2.image().mu_plus_target().field().values()
        );
        assert_eq!(d1.image().trace_minus(), d2.image().trace_minus());
    }

    #[test]
    fn pointwise_invert_trivial_cases() {
        let g = make_grid(8, 16, 0.8).unwrap();
        let a = ComplexField::from_fn(g.clone(), |z| 0.3 * z);
        let zero_b = mess_pointwise_invert(&a, &a, 1e-12).unwrap();
        assert!(zero_b.1.sup_norm() < 1e-12);
        assert!(zero_b.0.sub(&a).unwrap().sup_norm() < 1e-12);
        let minus = a.scale(Complex64::new(-1.0, 0.0));
        let zero_a = mess_pointwise_invert(&a, &minus, 1e-12).unwrap();
        assert!(zero_a.0.sup_norm() < 1e-12);
        assert!(zero_a.1.sub(&a).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn roundtrip_recovers_chart_data() {
        let data = forward_fixture();
        let (a, b) = mess_pointwise_invert(
            data.image().mu_plus_target().field(),
            data.image().mu_minus_target().field(),
            1e-12,
        )
        .unwrap();
        let g = grid();
        let mut fail = 0usize;
        let mut interior = 0usize;
        for j in 0..g.n_r() {
            if g.r_nodes()[j] > 0.95 * g.radius() {
                continue;
            }
            for k in 0..g.n_theta() {
                interior += 1;
                let i = g.idx(j, k);
                let da = (a.values()[i] - data.chart().mu().field().values()[i]).norm();
                let db = (b.values()[i] - data.pullback_mu_f().values()[i]).norm();
                if da.max(db) > 1e-6 {
                    fail += 1;
                }
            }
        }
        assert!(
            (fail as f64) < 0.01 * interior as f64,
            "{fail} of {interior} interior nodes off"
        );
    }

    #[test]
    fn section_point_freezes_one_target() {
        let g = grid();
        let (point, _) = section_point(&test_quad(), &g, Sign::Plus, 1e-10).unwrap();
        let data = mess_forward(&point, 1e-10).unwrap();
        // Minus target trivial on the + section.
        let sup_minus = data.image().mu_minus_target().sup_norm();
        assert!(sup_minus < 5e-5, "residual minus target {sup_minus}");
        // Nontrivial side obeys |mu_{z+}| = 2|mu_z|/(1+|mu_z|^2).
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let lhs = data.image().mu_plus_target().field().values()[i].norm();
                let m = point.mu_base().field().values()[i].norm();
                let rhs = 2.0 * m / (1.0 + m * m);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        assert!(worst < 1e-4, "section modulus relation {worst}");
    }

    #[test]
    fn composed_map_coefficient_matches_group_formula() {
        // |mu_F . F_-| = 2|mu_+|/(1+|mu_+|^2) for F = F_+ . F_-^{-1}.
        let data = forward_fixture();
        let pair = data.pair();
        let g = grid();
        let mut comp = Vec::with_capacity(g.len());
        for j in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let p = pair.f_minus().invert(g.node(j, k)).unwrap();
                comp.push(pair.f_plus().eval(p));
            }
        }
        let comp = ComplexField::new(g.clone(), comp).unwrap();
        let wz = crate::diff::d_z(&comp);
        let wzb = crate::diff::d_zbar(&comp);
        let mu_w = wzb.zip_with(&wz, |a, b| a / b).unwrap();
        let mu_w_interp = mu_w.interpolant();
        let mut worst = 0.0f64;
        for j in 0..g.n_r() {
            if g.r_nodes()[j] > 0.9 * g.radius() {
                continue;
            }
            for k in 0..g.n_theta() {
                let i = g.idx(j, k);
                let fm = pair.f_minus().values().values()[i];
                if fm.norm() > g.radius() {
                    continue;
                }
                let lhs = mu_w_interp.eval(fm).norm();
                let m = pair.mu_plus().field().values()[i].norm();
                let rhs = 2.0 * m / (1.0 + m * m);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        assert!(worst < 1e-4, "mu12 relation {worst}");
    }
}
