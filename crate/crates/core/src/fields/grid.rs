use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

/// Uniform periodic grid on the cube `[0, L)^3` with `n` points per axis.
///
/// Spectral storage uses the full FFT index layout: index `i` on an axis maps
/// to the integer mode `i` for `i < n/2` and `i - n` otherwise. Flat indices are
/// x-fastest, `i0 + n * (i1 + n * i2)`, in both physical and spectral space.
///
/// Cloning is cheap; FFT plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    length: f64,
    dealias_fraction: f64,
    cutoff: i64,
    modes: Vec<i64>,
    k_sq: Vec<f64>,
    retained: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PeriodicGrid {
    /// Grid with the default 2/3-rule dealiasing.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        Self::with_dealias(n, length, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn with_dealias(n: usize, length: f64, dealias_fraction: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::invalid(format!(
                "grid size n must be a positive even integer >= 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!(
                "period length L must be positive, got {length}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        let half = (n / 2) as i64;
        // the Nyquist mode never survives: it has no Hermitian partner
        let cutoff = ((dealias_fraction * half as f64 + 1e-12).floor() as i64).min(half - 1);
        if cutoff < 1 {
            return Err(Error::invalid(format!(
                "dealias fraction {dealias_fraction} retains no modes on an n = {n} grid"
            )));
        }
        let modes: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let base = 2.0 * PI / length;
        let total = n * n * n;
        let mut k_sq = Vec::with_capacity(total);
        let mut retained = Vec::with_capacity(total);
        for i2 in 0..n {
            for i1 in 0..n {
                for i0 in 0..n {
                    let m = [modes[i0], modes[i1], modes[i2]];
                    let k = [base * m[0] as f64, base * m[1] as f64, base * m[2] as f64];
                    k_sq.push(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                    retained.push(m.iter().all(|mi| mi.abs() <= cutoff));
                }
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                length,
                dealias_fraction,
                cutoff,
                modes,
                k_sq,
                retained,
                forward,
                inverse,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.inner.dealias_fraction
    }

    /// Largest retained integer mode per axis.
    pub fn cutoff(&self) -> i64 {
        self.inner.cutoff
    }

    pub fn len(&self) -> usize {
        self.inner.k_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.inner.length.powi(3)
    }

    pub fn index(&self, i0: usize, i1: usize, i2: usize) -> usize {
        let n = self.inner.n;
        i0 + n * (i1 + n * i2)
    }

    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.inner.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Integer mode triple of a flat spectral index.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let [a, b, c] = self.unflatten(idx);
        [self.inner.modes[a], self.inner.modes[b], self.inner.modes[c]]
    }

    /// Flat index of an integer mode triple (wrapped modulo n).
    pub fn mode_index(&self, m: [i64; 3]) -> usize {
        let n = self.inner.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        self.index(w(m[0]), w(m[1]), w(m[2]))
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let base = 2.0 * PI / self.inner.length;
        let m = self.mode(idx);
        [base * m[0] as f64, base * m[1] as f64, base * m[2] as f64]
    }

    pub fn k_sq(&self, idx: usize) -> f64 {
        self.inner.k_sq[idx]
    }

    pub fn k_sq_table(&self) -> &[f64] {
        &self.inner.k_sq
    }

    /// Whether the mode survives the dealiasing mask.
    pub fn is_retained(&self, idx: usize) -> bool {
        self.inner.retained[idx]
    }

    pub fn retained_mask(&self) -> &[bool] {
        &self.inner.retained
    }

    /// Flat index of `-k`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let [a, b, c] = self.unflatten(idx);
        self.index((n - a) % n, (n - b) % n, (n - c) % n)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [a, b, c] = self.unflatten(idx);
        [a as f64 * h, b as f64 * h, c as f64 * h]
    }

    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self == other
    }

    pub fn ensure_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// In-place unnormalized 3D transform; `inverse` selects the sign `+i`.
    pub(crate) fn fft3(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.inner.n;
        debug_assert_eq!(data.len(), n * n * n);
        let fft = if inverse {
            &self.inner.inverse
        } else {
            &self.inner.forward
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // x: contiguous rows
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        // y
        for i2 in 0..n {
            for i0 in 0..n {
                for (i1, v) in line.iter_mut().enumerate() {
                    *v = data[i0 + n * (i1 + n * i2)];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i1, v) in line.iter().enumerate() {
                    data[i0 + n * (i1 + n * i2)] = *v;
                }
            }
        }
        // z
        let plane = n * n;
        for j in 0..plane {
            for (i2, v) in line.iter_mut().enumerate() {
                *v = data[j + plane * i2];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i2, v) in line.iter().enumerate() {
                data[j + plane * i2] = *v;
            }
        }
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n
            && self.inner.length.to_bits() == other.inner.length.to_bits()
            && self.inner.dealias_fraction.to_bits() == other.inner.dealias_fraction.to_bits()
    }
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n", &self.inner.n)
            .field("length", &self.inner.length)
            .field("dealias_fraction", &self.inner.dealias_fraction)
            .field("cutoff", &self.inner.cutoff)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(PeriodicGrid::new(7, 1.0).is_err());
        assert!(PeriodicGrid::new(2, 1.0).is_err());
        assert!(PeriodicGrid::new(8, -1.0).is_err());
        assert!(PeriodicGrid::with_dealias(8, 1.0, 0.0).is_err());
        assert!(PeriodicGrid::with_dealias(8, 1.0, 1.5).is_err());
    }

    #[test]
    fn two_thirds_cutoff() {
        assert_eq!(PeriodicGrid::new(16, 1.0).unwrap().cutoff(), 5);
        assert_eq!(PeriodicGrid::new(8, 1.0).unwrap().cutoff(), 2);
        assert_eq!(PeriodicGrid::with_dealias(8, 1.0, 1.0).unwrap().cutoff(), 3);
        assert_eq!(PeriodicGrid::with_dealias(8, 1.0, 0.25).unwrap().cutoff(), 1);
    }

    #[test]
    fn wavenumbers_and_mask_are_symmetric() {
        let g = PeriodicGrid::new(8, 2.0 * PI).unwrap();
        for idx in 0..g.len() {
            let c = g.conjugate_index(idx);
            let (m, mc) = (g.mode(idx), g.mode(c));
            if m.iter().all(|v| v.abs() < 4) {
                assert_eq!(m, [-mc[0], -mc[1], -mc[2]]);
            }
            assert_eq!(g.is_retained(idx), g.is_retained(c));
            assert_eq!(g.mode_index(m), idx);
        }
        // unit box spacing for L = 2 pi
        let k = g.wavevector(g.mode_index([1, -2, 3]));
        assert!((k[0] - 1.0).abs() < 1e-15 && (k[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn fft_round_trip() {
        let g = PeriodicGrid::new(8, 1.0).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        g.fft3(&mut data, false);
        g.fft3(&mut data, true);
        let scale = 1.0 / g.len() as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a * scale - b).norm() < 1e-13);
        }
    }
}
