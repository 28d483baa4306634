//! The discrete nonlinear term `N(u) = P_N P F[(u . grad) u + beta f(u)]` of
//! the time stepper and the derivative maps the sensitivity solvers need.
//!
//! Every map here is the exact derivative (or L2-transpose) of the discrete
//! `N`, not a separate discretization of the continuous operator. `P_N` is the
//! dealiasing mask, `P` the Leray projection and `F` the forward transform.

use super::{
    advect, advect_transpose, neg_divergence_of_products, project_physical, DampingExponent,
    StateSample,
};
use crate::fields::SpectralField;
use crate::params::ModelParams;
use crate::vec3::{add, axpy, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearModel {
    pub beta: f64,
    pub damping: DampingExponent,
    /// Disables the convective term (linear test configurations).
    pub convection: bool,
}

impl NonlinearModel {
    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            beta: p.beta,
            damping: p.damping(),
            convection: true,
        }
    }

    pub fn with_convection(mut self, on: bool) -> Self {
        self.convection = on;
        self
    }

    /// `N(u)`
    pub fn apply(&self, u: &StateSample) -> SpectralField {
        let r = self.damping;
        let vals: Vec<Vec3> = u
            .values
            .iter()
            .zip(&u.grad)
            .map(|(z, g)| {
                let mut v = [0.0; 3];
                if self.convection {
                    v = advect(*z, g);
                }
                if self.beta != 0.0 {
                    v = axpy(v, self.beta, r.value(*z));
                }
                v
            })
            .collect();
        project_physical(u.grid(), &vals)
    }

    /// `N'(u) w = P_N P F[(w . grad) u + (u . grad) w + beta f'(u) w]`
    pub fn tangent(&self, u: &StateSample, w: &StateSample) -> SpectralField {
        let r = self.damping;
        let vals: Vec<Vec3> = (0..u.values.len())
            .map(|p| {
                let mut v = [0.0; 3];
                if self.convection {
                    v = add(advect(w.values[p], &u.grad[p]), advect(u.values[p], &w.grad[p]));
                }
                if self.beta != 0.0 {
                    v = axpy(v, self.beta, r.d1(u.values[p], w.values[p]));
                }
                v
            })
            .collect();
        project_physical(u.grid(), &vals)
    }

    /// `N'(u)^T phi` with respect to the L2 inner product on dealiased
    /// divergence-free fields: `(grad u)^T phi + beta f'(u) phi - div(phi (x) u)`.
    ///
    /// `flip_transport` negates the transport term; it exists only to check
    /// that the duality test detects a wrong adjoint.
    pub fn adjoint(&self, u: &StateSample, phi: &[Vec3], flip_transport: bool) -> SpectralField {
        let r = self.damping;
        let local: Vec<Vec3> = (0..u.values.len())
            .map(|p| {
                let mut v = [0.0; 3];
                if self.convection {
                    v = advect_transpose(phi[p], &u.grad[p]);
                }
                if self.beta != 0.0 {
                    // f'(u) is symmetric
                    v = axpy(v, self.beta, r.d1(u.values[p], phi[p]));
                }
                v
            })
            .collect();
        let mut out = project_physical(u.grid(), &local);
        if self.convection {
            let transport = neg_divergence_of_products(u.grid(), phi, &u.values);
            out.axpy(if flip_transport { -1.0 } else { 1.0 }, &transport);
        }
        out
    }

    /// Derivative of `u -> N'(u)^T phi` in direction `w`:
    /// `(grad w)^T phi + beta f''(u)[w, phi] - div(phi (x) w)`.
    ///
    /// Callers must ensure `r >= 2` when `beta > 0`.
    pub fn adjoint_derivative(&self, u: &StateSample, w: &StateSample, phi: &[Vec3]) -> SpectralField {
        let r = self.damping;
        let local: Vec<Vec3> = (0..u.values.len())
            .map(|p| {
                let mut v = [0.0; 3];
                if self.convection {
                    v = advect_transpose(phi[p], &w.grad[p]);
                }
                if self.beta != 0.0 {
                    v = axpy(v, self.beta, r.d2_unchecked(u.values[p], w.values[p], phi[p]));
                }
                v
            })
            .collect();
        let mut out = project_physical(u.grid(), &local);
        if self.convection {
            out.axpy(1.0, &neg_divergence_of_products(u.grid(), phi, &w.values));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PeriodicGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn model(r: f64) -> NonlinearModel {
        NonlinearModel {
            beta: 0.8,
            damping: DampingExponent::new(r).unwrap(),
            convection: true,
        }
    }

    fn random(seed: u64, amp: f64) -> SpectralField {
        let g = PeriodicGrid::new(8, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralField::random_divfree(&g, &mut rng, amp)
    }

    #[test]
    fn tangent_matches_central_difference() {
        for r in [1.0, 2.0, 3.0, 5.0] {
            let m = model(r);
            let u = random(1, 1.0);
            let w = random(2, 1.0);
            let eps = 1e-5;
            let plus = m.apply(&StateSample::new(&u.add(&w.scaled(eps))));
            let minus = m.apply(&StateSample::new(&u.sub(&w.scaled(eps))));
            let fd = plus.sub(&minus).scaled(0.5 / eps);
            let t = m.tangent(&StateSample::new(&u), &StateSample::new(&w));
            let rel = fd.sub(&t).l2_norm_sq().sqrt() / t.l2_norm_sq().sqrt();
            assert!(rel < 1e-8, "r = {r}: {rel}");
        }
    }

    #[test]
    fn adjoint_is_transpose_of_tangent() {
        for r in [1.0, 2.5, 3.0] {
            let m = model(r);
            let u = StateSample::new(&random(3, 1.0));
            let w = random(4, 1.0);
            let phi = random(5, 1.0);
            let lhs = m.tangent(&u, &StateSample::new(&w)).inner(&phi);
            let rhs = m.adjoint(&u, phi.to_physical().values(), false).inner(&w);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn adjoint_derivative_matches_difference_of_adjoints() {
        let m = model(4.0);
        let u = random(6, 1.0);
        let w = random(7, 1.0);
        let phi = random(8, 1.0).to_physical();
        let eps = 1e-5;
        let a = m.adjoint(&StateSample::new(&u.add(&w.scaled(eps))), phi.values(), false);
        let b = m.adjoint(&StateSample::new(&u.sub(&w.scaled(eps))), phi.values(), false);
        let fd = a.sub(&b).scaled(0.5 / eps);
        let d = m.adjoint_derivative(&StateSample::new(&u), &StateSample::new(&w), phi.values());
        let rel = fd.sub(&d).l2_norm_sq().sqrt() / d.l2_norm_sq().sqrt();
        assert!(rel < 1e-8, "{rel}");
    }
}
