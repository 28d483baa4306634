//! Stokes operator, convective bilinear/trilinear forms, the damping
//! nonlinearity and the discrete nonlinear term of the solver together with
//! its derivatives.

pub mod damping;
mod nonlinear;

use num_complex::Complex64;

pub use damping::{
    damping, damping_d1, damping_d2, damping_d3, monotonicity_constant, monotonicity_gap,
    DampingExponent,
};
pub use nonlinear::NonlinearModel;

use crate::error::Result;
use crate::fields::{scalars_to_physical, scalars_to_spectral, PeriodicGrid, PhysicalField, SpectralField};
use crate::vec3::Vec3;

/// `grad[i][j] = d u_i / d x_j`
pub type Gradient = [[f64; 3]; 3];

/// Physical values and velocity gradient of a spectral field at every grid point.
#[derive(Clone, Debug)]
pub struct StateSample {
    grid: PeriodicGrid,
    pub values: Vec<Vec3>,
    pub grad: Vec<Gradient>,
}

impl StateSample {
    pub fn new(u: &SpectralField) -> Self {
        let grid = u.grid().clone();
        let i = Complex64::new(0.0, 1.0);
        let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(12);
        for c in 0..3 {
            spectra.push(u.coeffs().iter().map(|v| v[c]).collect());
        }
        for comp in 0..3 {
            for dir in 0..3 {
                spectra.push(
                    u.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(idx, v)| i * grid.wavevector(idx)[dir] * v[comp])
                        .collect(),
                );
            }
        }
        let refs: Vec<&[Complex64]> = spectra.iter().map(|s| s.as_slice()).collect();
        let phys = scalars_to_physical(&grid, &refs);
        let len = grid.len();
        let values = (0..len).map(|p| [phys[0][p], phys[1][p], phys[2][p]]).collect();
        let grad = (0..len)
            .map(|p| {
                let mut g = [[0.0; 3]; 3];
                for (comp, row) in g.iter_mut().enumerate() {
                    for (dir, v) in row.iter_mut().enumerate() {
                        *v = phys[3 + 3 * comp + dir][p];
                    }
                }
                g
            })
            .collect();
        Self { grid, values, grad }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn physical(&self) -> PhysicalField {
        PhysicalField::from_values_unchecked(&self.grid, self.values.clone())
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| crate::vec3::norm(*v)).fold(0.0, f64::max)
    }
}

/// `(a . grad) b` at a point, given `b`'s gradient.
#[inline]
pub(crate) fn advect(a: Vec3, grad_b: &Gradient) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = grad_b[i][0] * a[0] + grad_b[i][1] * a[1] + grad_b[i][2] * a[2];
    }
    out
}

/// `(grad b)^T a`, i.e. `sum_i d_j b_i a_i` at a point.
#[inline]
pub(crate) fn advect_transpose(a: Vec3, grad_b: &Gradient) -> Vec3 {
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = grad_b[0][j] * a[0] + grad_b[1][j] * a[1] + grad_b[2][j] * a[2];
    }
    out
}

/// Forward transform of a pointwise vector field followed by dealiasing and
/// Leray projection.
pub(crate) fn project_physical(grid: &PeriodicGrid, values: &[Vec3]) -> SpectralField {
    let mut s = PhysicalField::from_values_unchecked(grid, values.to_vec()).to_spectral_unmasked();
    s.project_dealias_in_place();
    s
}

/// `-P div(a (x) b)` projected and dealiased, i.e. the conservative form of
/// `-(b . grad) a`, computed from the pointwise products `a_i b_j`.
pub(crate) fn neg_divergence_of_products(grid: &PeriodicGrid, a: &[Vec3], b: &[Vec3]) -> SpectralField {
    let len = grid.len();
    let products: Vec<Vec<f64>> = (0..9)
        .map(|ij| {
            let (i, j) = (ij / 3, ij % 3);
            (0..len).map(|p| a[p][i] * b[p][j]).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = products.iter().map(|v| v.as_slice()).collect();
    let spec = scalars_to_spectral(grid, &refs);
    let i = Complex64::new(0.0, 1.0);
    let coeffs = (0..len)
        .map(|idx| {
            let k = grid.wavevector(idx);
            let mut v = [Complex64::new(0.0, 0.0); 3];
            for (comp, out) in v.iter_mut().enumerate() {
                for (dir, kd) in k.iter().enumerate() {
                    *out -= i * *kd * spec[3 * comp + dir][idx];
                }
            }
            v
        })
        .collect();
    let mut s = SpectralField::from_coeffs(grid, coeffs).expect("sizes agree");
    s.project_dealias_in_place();
    s
}

/// Stokes operator `A u = -P Lap u`: multiplies each mode by `|k|^2`.
pub fn stokes_apply(u: &SpectralField) -> SpectralField {
    let grid = u.grid().clone();
    u.map_modes(|idx, v| {
        let k2 = grid.k_sq(idx);
        [v[0] * k2, v[1] * k2, v[2] * k2]
    })
}

/// Spectral Laplacian.
pub fn laplacian(u: &SpectralField) -> SpectralField {
    stokes_apply(u).scaled(-1.0)
}

/// `B(u, v) = P (u . grad) v`, pseudo-spectral with dealiasing.
pub fn convect(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.grid().ensure_same(v.grid())?;
    let su = StateSample::new(u);
    let sv = StateSample::new(v);
    let prod: Vec<Vec3> = su
        .values
        .iter()
        .zip(&sv.grad)
        .map(|(a, g)| advect(*a, g))
        .collect();
    Ok(project_physical(u.grid(), &prod))
}

/// `b(u, v, w) = ((u . grad) v, w)` by collocation quadrature, no projection.
pub fn trilinear(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.grid().ensure_same(v.grid())?;
    u.grid().ensure_same(w.grid())?;
    let su = StateSample::new(u);
    let sv = StateSample::new(v);
    let pw = w.to_physical();
    let s: f64 = su
        .values
        .iter()
        .zip(&sv.grad)
        .zip(pw.values())
        .map(|((a, g), c)| crate::vec3::dot(advect(*a, g), *c))
        .sum();
    Ok(s * u.grid().cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn fields(seed: u64) -> (SpectralField, SpectralField, SpectralField) {
        let g = PeriodicGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            SpectralField::random_divfree(&g, &mut rng, 1.0),
            SpectralField::random_divfree(&g, &mut rng, 0.7),
            SpectralField::random_divfree(&g, &mut rng, 1.3),
        )
    }

    #[test]
    fn stokes_scales_single_mode() {
        let g = PeriodicGrid::new(8, 2.0 * PI).unwrap();
        let c = Complex64::new(0.5, -0.25);
        let z = Complex64::new(0.0, 0.0);
        let u = SpectralField::single_mode(&g, [1, 1, 0], [z, z, c]);
        let au = stokes_apply(&u);
        assert!(au.sub(&u.scaled(2.0)).max_abs_coeff() < 1e-15);
        assert_eq!(stokes_apply(&SpectralField::zeros(&g)).max_abs_coeff(), 0.0);
    }

    #[test]
    fn stokes_energy_identity() {
        let (u, _, _) = fields(11);
        let lhs = stokes_apply(&u).inner(&u);
        assert!((lhs - u.gradient_norm_sq()).abs() <= 1e-12 * lhs);
        let via_lap = laplacian(&u).leray_project().scaled(-1.0);
        assert!(via_lap.max_diff(&stokes_apply(&u)) < 1e-13);
    }

    #[test]
    fn convect_zero_advector() {
        let (u, v, _) = fields(5);
        let z = SpectralField::zeros(u.grid());
        assert_eq!(convect(&z, &v).unwrap().max_abs_coeff(), 0.0);
        // divergence-free output
        assert!(convect(&u, &v).unwrap().divergence_residual() < 1e-13);
    }

    #[test]
    fn trilinear_skew_symmetry() {
        let (u, v, w) = fields(7);
        let scale = u.l2_norm_sq().sqrt() * v.l2_norm_sq().sqrt() * w.l2_norm_sq().sqrt();
        let bvv = trilinear(&u, &v, &v).unwrap();
        assert!(bvv.abs() <= 1e-12 * u.l2_norm_sq().sqrt() * v.l2_norm_sq());
        let a = trilinear(&u, &v, &w).unwrap();
        let b = trilinear(&u, &w, &v).unwrap();
        assert!((a + b).abs() <= 1e-12 * scale, "{a} {b}");
    }

    #[test]
    fn conservative_form_matches_advection_for_divergence_free() {
        let (u, phi, _) = fields(13);
        let su = StateSample::new(&u);
        let sphi = StateSample::new(&phi);
        let cons = neg_divergence_of_products(u.grid(), &sphi.values, &su.values);
        let adv = convect(&u, &phi).unwrap().scaled(-1.0);
        let rel = cons.sub(&adv).l2_norm_sq().sqrt() / adv.l2_norm_sq().sqrt();
        assert!(rel < 1e-12, "{rel}");
    }
}
