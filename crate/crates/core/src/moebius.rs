//! Moebius transformations as projective 2x2 matrices.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    pub fn identity() -> Self {
        Moebius {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// The unique Moebius map sending `p[i]` to `q[i]`.
    pub fn three_point(p: [Complex64; 3], q: [Complex64; 3]) -> Self {
        let m1 = Self::to_zero_one_inf(p);
        let m2 = Self::to_zero_one_inf(q);
        m2.inverse().compose(&m1)
    }

    /// Sends `(p1, p2, p3)` to `(0, 1, inf)`.
    fn to_zero_one_inf(p: [Complex64; 3]) -> Self {
        let [p1, p2, p3] = p;
        Moebius {
            a: p2 - p3,
            b: -p1 * (p2 - p3),
            c: p2 - p1,
            d: -p3 * (p2 - p1),
        }
    }

    pub fn compose(&self, other: &Moebius) -> Moebius {
        Moebius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> Moebius {
        Moebius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    #[inline]
    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Derivative `(ad - bc) / (cz + d)^2`.
    #[inline]
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }

    /// Normalization at a jet: sends `w` with `w(0)=a0, w'(0)=a1, w''(0)=a2`
    /// to a map fixing `0` with unit derivative and vanishing second
    /// derivative there.
    pub fn jet_normalizer(a0: Complex64, a1: Complex64, a2: Complex64) -> Moebius {
        // m(zeta) = (zeta - a0) / (a1 + (a2 / (2 a1)) (zeta - a0))
        let half = a2 / (2.0 * a1);
        Moebius {
            a: Complex64::new(1.0, 0.0),
            b: -a0,
            c: half,
            d: a1 - half * a0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_maps_points() {
        let p = [
            Complex64::new(1.0, 0.1),
            Complex64::new(-0.9, 0.2),
            Complex64::new(0.1, -1.0),
        ];
        let q = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let m = Moebius::three_point(p, q);
        for i in 0..3 {
            assert!((m.apply(p[i]) - q[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn jet_normalizer_kills_second_derivative() {
        let a0 = Complex64::new(0.2, -0.1);
        let a1 = Complex64::new(1.1, 0.3);
        let a2 = Complex64::new(-0.4, 0.2);
        let m = Moebius::jet_normalizer(a0, a1, a2);
        // w(z) = a0 + a1 z + a2/2 z^2; m(w(z)) should be z + O(z^3).
        let w = |z: Complex64| a0 + a1 * z + 0.5 * a2 * z * z;
        for &h in &[1e-3, 5e-4] {
            let z = Complex64::new(h, 0.0);
            let err = (m.apply(w(z)) - z).norm();
            assert!(err < 10.0 * h * h * h, "h={h}: {err}");
        }
    }
}
