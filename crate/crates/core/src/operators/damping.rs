//! The power-law damping nonlinearity `f(u) = |u|^{r-1} u` and its first
//! three derivatives, evaluated pointwise.
//!
//! Below `|p| < ZERO_THRESHOLD` the fractional-exponent branches use their
//! zero value so negative powers of `|p|` are never formed.

use crate::error::{Error, Result};
use crate::fields::PhysicalField;
use crate::vec3::{axpy, dot, norm, scale, Vec3};

pub const ZERO_THRESHOLD: f64 = 1e-150;

/// Damping exponent `r >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingExponent(f64);

impl DampingExponent {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r >= 1.0 {
            Ok(Self(r))
        } else {
            Err(Error::invalid(format!("damping exponent must satisfy r >= 1, got {r}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `f(z) = |z|^{r-1} z`
    pub fn value(self, z: Vec3) -> Vec3 {
        let r = self.0;
        if r == 1.0 {
            return z;
        }
        let nz = norm(z);
        if nz < ZERO_THRESHOLD {
            return [0.0; 3];
        }
        scale(nz.powf(r - 1.0), z)
    }

    /// `f'(z) w`
    pub fn d1(self, z: Vec3, w: Vec3) -> Vec3 {
        let r = self.0;
        if r == 1.0 {
            return w;
        }
        let nz = norm(z);
        if r < 3.0 && nz < ZERO_THRESHOLD {
            return [0.0; 3];
        }
        let zw = dot(z, w);
        axpy(scale(nz.powf(r - 1.0), w), (r - 1.0) * nz.powf(r - 3.0) * zw, z)
    }

    /// `f''(p)[q, g]`; requires `r >= 2`.
    pub fn d2(self, p: Vec3, q: Vec3, g: Vec3) -> Result<Vec3> {
        if self.0 < 2.0 {
            return Err(Error::invalid(format!(
                "second derivative of the damping term requires r >= 2, got {}",
                self.0
            )));
        }
        Ok(self.d2_unchecked(p, q, g))
    }

    pub(crate) fn d2_unchecked(self, p: Vec3, q: Vec3, g: Vec3) -> Vec3 {
        let r = self.0;
        let np = norm(p);
        if r < 5.0 && np < ZERO_THRESHOLD {
            return [0.0; 3];
        }
        let (pq, pg, gq) = (dot(p, q), dot(p, g), dot(g, q));
        let a = (r - 1.0) * (r - 3.0) * np.powf(r - 5.0) * (pq * pg);
        let b = (r - 1.0) * np.powf(r - 3.0);
        // sums are arranged so swapping q and g is bitwise exact
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = (a + b * gq) * p[c] + b * (pq * g[c] + pg * q[c]);
        }
        out
    }

    /// `f'''(p)[q, g, h]`; requires `r >= 3`.
    pub fn d3(self, p: Vec3, q: Vec3, g: Vec3, h: Vec3) -> Result<Vec3> {
        let r = self.0;
        if r < 3.0 {
            return Err(Error::invalid(format!(
                "third derivative of the damping term requires r >= 3, got {r}"
            )));
        }
        let (hq, hg, gq) = (dot(h, q), dot(h, g), dot(g, q));
        if r == 3.0 {
            let mut out = [0.0; 3];
            for c in 0..3 {
                out[c] = 2.0 * sym_sum3(hq * g[c], hg * q[c], gq * h[c]);
            }
            return Ok(out);
        }
        let np = norm(p);
        if r < 7.0 && np < ZERO_THRESHOLD {
            return Ok([0.0; 3]);
        }
        let (pq, pg, ph) = (dot(p, q), dot(p, g), dot(p, h));
        let c3 = (r - 1.0) * (r - 3.0) * (r - 5.0) * np.powf(r - 7.0);
        let c2 = (r - 1.0) * (r - 3.0) * np.powf(r - 5.0);
        let c1 = (r - 1.0) * np.powf(r - 3.0);
        // every grouping below is a symmetric function of (q, g, h), so the
        // result is bitwise invariant under permutation of the directions
        let coef_p = c3 * sym_prod3(pq, pg, ph) + c2 * sym_sum3(pg * hq, pq * hg, ph * gq);
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = coef_p * p[c]
                + c2 * sym_sum3((pq * pg) * h[c], (ph * pq) * g[c], (ph * pg) * q[c])
                + c1 * sym_sum3(hq * g[c], hg * q[c], gq * h[c]);
        }
        Ok(out)
    }
}

fn sym_sum3(a: f64, b: f64, c: f64) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(f64::total_cmp);
    v[0] + v[1] + v[2]
}

fn sym_prod3(a: f64, b: f64, c: f64) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(f64::total_cmp);
    v[0] * v[1] * v[2]
}

/// Pointwise `f(u(x))`.
pub fn damping(u: &PhysicalField, r: DampingExponent) -> PhysicalField {
    u.map(|z| r.value(z))
}

pub fn damping_d1(z: Vec3, w: Vec3, r: DampingExponent) -> Vec3 {
    r.d1(z, w)
}

pub fn damping_d2(p: Vec3, q: Vec3, g: Vec3, r: DampingExponent) -> Result<Vec3> {
    r.d2(p, q, g)
}

pub fn damping_d3(p: Vec3, q: Vec3, g: Vec3, h: Vec3, r: DampingExponent) -> Result<Vec3> {
    r.d3(p, q, g, h)
}

/// Constant of the strong monotonicity bound, `2^{1-r}`.
pub fn monotonicity_constant(r: DampingExponent) -> f64 {
    (1.0 - r.get()).exp2()
}

/// Returns `(lhs, rhs)` of the monotonicity bound
/// `int (f(u1) - f(u2)).(u1 - u2) >= C(r) ||u1 - u2||_{r+1}^{r+1}`,
/// both by collocation quadrature.
pub fn monotonicity_gap(u1: &PhysicalField, u2: &PhysicalField, r: DampingExponent) -> (f64, f64) {
    assert!(u1.grid().same_as(u2.grid()), "grid mismatch");
    let mut lhs = 0.0;
    let mut diff_pow = 0.0;
    for (a, b) in u1.values().iter().zip(u2.values()) {
        let d = crate::vec3::sub(*a, *b);
        lhs += dot(crate::vec3::sub(r.value(*a), r.value(*b)), d);
        diff_pow += norm(d).powf(r.get() + 1.0);
    }
    let h3 = u1.grid().cell_volume();
    (lhs * h3, monotonicity_constant(r) * diff_pow * h3)
}

#[cfg(test)]
mod tests {
    use super::*;

    const E1: Vec3 = [1.0, 0.0, 0.0];

    fn r(v: f64) -> DampingExponent {
        DampingExponent::new(v).unwrap()
    }

    #[test]
    fn rejects_small_exponent() {
        assert!(DampingExponent::new(0.5).is_err());
        assert!(DampingExponent::new(f64::NAN).is_err());
        assert!(r(1.5).d2(E1, E1, E1).is_err());
        assert!(r(2.5).d3(E1, E1, E1, E1).is_err());
    }

    #[test]
    fn value_examples() {
        let u = [0.3, -2.0, 1.0];
        assert_eq!(r(1.0).value(u), u);
        assert_eq!(r(3.0).value([2.0, 0.0, 0.0]), [8.0, 0.0, 0.0]);
        for e in [1.5, 2.0, 3.0, 7.0] {
            assert_eq!(r(e).value([0.0; 3]), [0.0; 3]);
        }
    }

    #[test]
    fn first_derivative_branches() {
        let w = [0.2, -0.7, 1.1];
        assert_eq!(r(1.0).d1([5.0, 1.0, 2.0], w), w);
        assert_eq!(r(2.0).d1([0.0; 3], w), [0.0; 3]);
        assert_eq!(r(3.0).d1(E1, E1), [3.0, 0.0, 0.0]);
    }

    #[test]
    fn second_derivative_examples() {
        assert_eq!(r(3.0).d2(E1, E1, E1).unwrap(), [6.0, 0.0, 0.0]);
        assert_eq!(r(4.0).d2([0.0; 3], E1, [0.0, 1.0, 2.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn third_derivative_examples() {
        assert_eq!(r(3.0).d3([0.4, 0.1, 0.0], E1, E1, E1).unwrap(), [6.0, 0.0, 0.0]);
        assert_eq!(r(5.0).d3([0.0; 3], E1, [0.0, 1.0, 0.0], E1).unwrap(), [0.0; 3]);
    }

    #[test]
    fn derivative_symmetry_is_exact() {
        let p = [0.3, -1.2, 0.8];
        let (q, g, h) = ([0.5, 0.1, -0.4], [-0.9, 0.3, 0.2], [0.05, 0.7, -0.6]);
        for e in [3.0, 4.0, 5.5, 7.0, 9.0] {
            let d = r(e);
            let a = d.d2(p, q, g).unwrap();
            let b = d.d2(p, g, q).unwrap();
            for c in 0..3 {
                assert_eq!(a[c], b[c]);
            }
            let perms = [
                d.d3(p, q, g, h).unwrap(),
                d.d3(p, q, h, g).unwrap(),
                d.d3(p, g, q, h).unwrap(),
                d.d3(p, g, h, q).unwrap(),
                d.d3(p, h, q, g).unwrap(),
                d.d3(p, h, g, q).unwrap(),
            ];
            for x in &perms[1..] {
                for c in 0..3 {
                    assert_eq!(x[c], perms[0][c]);
                }
            }
        }
    }

    #[test]
    fn monotonicity_trivial_cases() {
        use crate::fields::PeriodicGrid;
        let g = PeriodicGrid::new(4, 1.0).unwrap();
        let u = PhysicalField::from_fn(&g, |x| [x[0] - 0.3, x[1] * x[2], 1.0]);
        assert_eq!(monotonicity_gap(&u, &u, r(2.0)), (0.0, 0.0));
        let (lhs, rhs) = monotonicity_gap(&u, &PhysicalField::zeros(&g), r(3.0));
        let l4 = u.lp_norm_pow(4.0);
        assert!((lhs - l4).abs() < 1e-13 * l4);
        assert!((rhs - 0.25 * l4).abs() < 1e-13 * l4);
        assert!(lhs >= rhs);
    }
}
