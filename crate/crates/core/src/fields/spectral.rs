use num_complex::Complex64;
use rand::Rng;

use super::{PeriodicGrid, PhysicalField};
use crate::error::{Error, Result};

pub type CVec3 = [Complex64; 3];

const CZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const CVZERO: CVec3 = [CZERO; 3];

/// Velocity field stored as Fourier coefficients over the full logical spectrum.
///
/// The physical field is `u(x) = sum_k c(k) exp(i k.x)`, so the L2 norm over the
/// box is `L^3 * sum_k |c(k)|^2`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<CVec3>,
}

impl SpectralField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![CVZERO; grid.len()],
        }
    }

    pub fn from_coeffs(grid: &PeriodicGrid, coeffs: Vec<CVec3>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Real field `a exp(i k.x) + conj(a) exp(-i k.x)` for the integer mode `m`.
    pub fn single_mode(grid: &PeriodicGrid, m: [i64; 3], amplitude: CVec3) -> Self {
        let mut f = Self::zeros(grid);
        f.set_mode_pair(m, amplitude);
        f
    }

    /// Random real, divergence-free, zero-mean field on the retained modes with
    /// coefficients decaying like `1/(1+|m|^2)`; normalized so that the L2 norm
    /// equals `amplitude * L^{3/2}` (unit RMS velocity times `amplitude`).
    pub fn random_divfree<R: Rng + ?Sized>(grid: &PeriodicGrid, rng: &mut R, amplitude: f64) -> Self {
        let mut f = Self::zeros(grid);
        for idx in 0..grid.len() {
            if !grid.is_retained(idx) {
                continue;
            }
            let m = grid.mode(idx);
            let decay = 1.0 / (1.0 + (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64);
            for c in 0..3 {
                f.coeffs[idx][c] = Complex64::new(
                    rng.gen_range(-1.0..1.0) * decay,
                    rng.gen_range(-1.0..1.0) * decay,
                );
            }
        }
        let mut f = f.hermitian_part().leray_project();
        let norm = f.l2_norm_sq().sqrt();
        if norm > 0.0 {
            f.scale(amplitude * grid.volume().sqrt() / norm);
        }
        f
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[CVec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [CVec3] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<CVec3> {
        self.coeffs
    }

    pub fn coeff(&self, m: [i64; 3]) -> CVec3 {
        self.coeffs[self.grid.mode_index(m)]
    }

    /// Sets `c(m) = a` and `c(-m) = conj(a)`.
    pub fn set_mode_pair(&mut self, m: [i64; 3], a: CVec3) {
        let idx = self.grid.mode_index(m);
        let cidx = self.grid.conjugate_index(idx);
        self.coeffs[idx] = a;
        self.coeffs[cidx] = [a[0].conj(), a[1].conj(), a[2].conj()];
    }

    /// `(c(k) + conj(c(-k))) / 2`: the coefficients of the real part of the field.
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zeros(&self.grid);
        for idx in 0..self.coeffs.len() {
            let cidx = self.grid.conjugate_index(idx);
            for c in 0..3 {
                out.coeffs[idx][c] = 0.5 * (self.coeffs[idx][c] + self.coeffs[cidx][c].conj());
            }
        }
        out
    }

    /// Largest `|c(k) - conj(c(-k))|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.coeffs.len() {
            let cidx = self.grid.conjugate_index(idx);
            for c in 0..3 {
                worst = worst.max((self.coeffs[idx][c] - self.coeffs[cidx][c].conj()).norm());
            }
        }
        worst
    }

    /// Helmholtz-Leray projection `(I - k k^T / |k|^2)` with the mean mode zeroed.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        out.leray_project_in_place();
        out
    }

    pub fn leray_project_in_place(&mut self) {
        for idx in 0..self.coeffs.len() {
            let k_sq = self.grid.k_sq(idx);
            if k_sq == 0.0 {
                self.coeffs[idx] = CVZERO;
                continue;
            }
            let k = self.grid.wavevector(idx);
            let v = &mut self.coeffs[idx];
            let kv = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k_sq;
            for c in 0..3 {
                v[c] -= kv * k[c];
            }
        }
    }

    /// Zeroes every mode outside the dealiasing mask.
    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        for (v, keep) in self.coeffs.iter_mut().zip(self.grid.retained_mask()) {
            if !keep {
                *v = CVZERO;
            }
        }
    }

    /// Dealias, project onto divergence-free fields and zero the mean.
    pub fn project_dealias_in_place(&mut self) {
        self.dealias_in_place();
        self.leray_project_in_place();
    }

    pub fn to_physical(&self) -> PhysicalField {
        PhysicalField::from_values_unchecked(&self.grid, super::transform::to_physical(&self.grid, &self.coeffs))
    }

    /// `L^3 sum_k |c(k)|^2`
    pub fn l2_norm_sq(&self) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `L^3 sum_k |k|^2 |c(k)|^2`, the squared H1-seminorm.
    pub fn gradient_norm_sq(&self) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.k_sq_table())
            .map(|(v, k2)| k2 * v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// L2 inner product of two real fields.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert!(self.grid.same_as(&other.grid), "grid mismatch in inner product");
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (0..3).map(|c| (a[c].conj() * b[c]).re).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `(grad a, grad b)` in L2.
    pub fn gradient_inner(&self, other: &SpectralField) -> f64 {
        assert!(self.grid.same_as(&other.grid), "grid mismatch in inner product");
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.grid.k_sq_table())
            .map(|((a, b), k2)| k2 * (0..3).map(|c| (a[c].conj() * b[c]).re).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `i k x c(k)`
    pub fn curl(&self) -> Self {
        let mut out = Self::zeros(&self.grid);
        let i = Complex64::new(0.0, 1.0);
        for idx in 0..self.coeffs.len() {
            let k = self.grid.wavevector(idx);
            let v = self.coeffs[idx];
            out.coeffs[idx] = [
                i * (v[2] * k[1] - v[1] * k[2]),
                i * (v[0] * k[2] - v[2] * k[0]),
                i * (v[1] * k[0] - v[0] * k[1]),
            ];
        }
        out
    }

    /// `max_k |k . c(k)| / sqrt(sum |c|^2)`; zero for the zero field.
    pub fn divergence_residual(&self) -> f64 {
        let norm: f64 = self
            .coeffs
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let worst = (0..self.coeffs.len())
            .map(|idx| {
                let k = self.grid.wavevector(idx);
                let v = self.coeffs[idx];
                (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]).norm()
            })
            .fold(0.0, f64::max);
        worst / norm
    }

    pub fn mean(&self) -> CVec3 {
        self.coeffs[0]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|v| v.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.coeffs {
            for z in v.iter_mut() {
                *z *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert!(self.grid.same_as(&x.grid), "grid mismatch in axpy");
        for (v, w) in self.coeffs.iter_mut().zip(&x.coeffs) {
            for c in 0..3 {
                v[c] += w[c] * a;
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Applies a per-mode map `f(idx, c(k))`.
    pub fn map_modes(&self, mut f: impl FnMut(usize, CVec3) -> CVec3) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, v)| f(idx, *v))
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Largest coefficient difference, used for round-trip comparisons.
    pub fn max_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).norm()))
            .fold(0.0, f64::max)
    }
}
