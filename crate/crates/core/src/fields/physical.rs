use rand::Rng;

use super::{PeriodicGrid, SpectralField};
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Real 3-vector per grid point, x-fastest ordering.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: PeriodicGrid,
    values: Vec<Vec3>,
}

impl PhysicalField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![[0.0; 3]; grid.len()],
        }
    }

    pub fn constant(grid: &PeriodicGrid, v: Vec3) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![v; grid.len()],
        }
    }

    pub fn from_values(grid: &PeriodicGrid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} points, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("physical field contains non-finite values"));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &PeriodicGrid, values: Vec<Vec3>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn([f64; 3]) -> Vec3) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Independent uniform samples in `[-amplitude, amplitude]` per component.
    pub fn random<R: Rng + ?Sized>(grid: &PeriodicGrid, rng: &mut R, amplitude: f64) -> Self {
        let values = (0..grid.len())
            .map(|_| {
                [
                    amplitude * rng.gen_range(-1.0..1.0),
                    amplitude * rng.gen_range(-1.0..1.0),
                    amplitude * rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    /// Forward transform followed by the dealiasing mask.
    pub fn to_spectral(&self) -> SpectralField {
        let mut s = self.to_spectral_unmasked();
        s.dealias_in_place();
        s
    }

    pub fn to_spectral_unmasked(&self) -> SpectralField {
        let coeffs = super::transform::to_spectral(&self.grid, &self.values);
        SpectralField::from_coeffs(&self.grid, coeffs).expect("grid sizes agree")
    }

    /// Cell-volume-weighted quadrature of `|u|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| vec3::dot(*v, *v)).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn inner(&self, other: &PhysicalField) -> f64 {
        assert!(self.grid.same_as(&other.grid), "grid mismatch in inner product");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| vec3::dot(*a, *b))
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// `(sum_x h^3 |u(x)|^p)^{1/p}` with `|.|` the Euclidean norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::invalid(format!("Lp norm requires p >= 1, got {p}")));
        }
        Ok(self.lp_norm_pow(p).powf(1.0 / p))
    }

    /// `sum_x h^3 |u(x)|^p`
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .map(|v| vec3::norm(*v).powf(p))
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// `max_x |u(x)|`
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| vec3::norm(*v)).fold(0.0, f64::max)
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &PhysicalField, f: impl Fn(Vec3, Vec3) -> Vec3) -> Self {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v = vec3::scale(a, *v);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| vec3::scale(a, v))
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &PhysicalField) {
        assert!(self.grid.same_as(&x.grid), "grid mismatch in axpy");
        for (v, w) in self.values.iter_mut().zip(&x.values) {
            *v = vec3::axpy(*v, a, *w);
        }
    }

    pub fn add(&self, other: &PhysicalField) -> Self {
        self.zip_map(other, vec3::add)
    }

    pub fn sub(&self, other: &PhysicalField) -> Self {
        self.zip_map(other, vec3::sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn cosine_mode_round_trip() {
        let g = PeriodicGrid::new(16, 3.0).unwrap();
        let l = g.length();
        let u = PhysicalField::from_fn(&g, |x| [0.0, (2.0 * PI * x[0] / l).cos(), 0.0]);
        let s = u.to_spectral();
        let c = s.coeff([1, 0, 0]);
        assert!((c[1].re - 0.5).abs() < 1e-15 && c[1].im.abs() < 1e-15);
        let back = s.to_physical();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a[1] - b[1]).abs() < 1e-14);
        }
        let again = back.to_spectral();
        assert!(again.max_diff(&s) < 1e-15);
    }

    #[test]
    fn zero_round_trip() {
        let g = PeriodicGrid::new(8, 1.0).unwrap();
        let z = PhysicalField::zeros(&g);
        let s = z.to_spectral();
        assert_eq!(s.max_abs_coeff(), 0.0);
        assert_eq!(s.to_physical().max_abs(), 0.0);
    }

    #[test]
    fn random_spectral_round_trip() {
        let g = PeriodicGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = SpectralField::random_divfree(&g, &mut rng, 1.0);
        let back = s.to_physical().to_spectral();
        let rel = back.sub(&s).l2_norm_sq().sqrt() / s.l2_norm_sq().sqrt();
        assert!(rel <= 1e-13, "round-trip error {rel}");
    }

    #[test]
    fn parseval_matches_quadrature() {
        let g = PeriodicGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = SpectralField::random_divfree(&g, &mut rng, 1.3);
        let p = s.to_physical();
        let rel = (s.l2_norm_sq() - p.l2_norm_sq()).abs() / s.l2_norm_sq();
        assert!(rel <= 1e-10);
    }

    #[test]
    fn lp_norm_rejects_small_p() {
        let g = PeriodicGrid::new(8, 1.0).unwrap();
        let u = PhysicalField::constant(&g, [1.0, 0.0, 0.0]);
        assert!(u.lp_norm(0.5).is_err());
        // |u| = 1 on a unit box
        assert!((u.lp_norm(3.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(PhysicalField::zeros(&g).lp_norm(2.0).unwrap(), 0.0);
    }
}
