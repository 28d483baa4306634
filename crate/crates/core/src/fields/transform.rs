//! Physical <-> spectral transforms for real vector fields.
//!
//! Two real components are packed into one complex transform, so a vector
//! field costs two 3D FFTs per direction instead of three.

use num_complex::Complex64;

use super::spectral::{CVec3, CVZERO};
use super::PeriodicGrid;

/// Inverse transform of a batch of real scalar spectra.
pub(crate) fn scalars_to_physical(grid: &PeriodicGrid, spectra: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let len = grid.len();
    let mut out = Vec::with_capacity(spectra.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let i = Complex64::new(0.0, 1.0);
    for pair in spectra.chunks(2) {
        match pair {
            [a, b] => {
                for ((z, x), y) in buf.iter_mut().zip(a.iter()).zip(b.iter()) {
                    *z = x + i * y;
                }
                grid.fft3(&mut buf, true);
                out.push(buf.iter().map(|z| z.re).collect());
                out.push(buf.iter().map(|z| z.im).collect());
            }
            [a] => {
                buf.copy_from_slice(a);
                grid.fft3(&mut buf, true);
                out.push(buf.iter().map(|z| z.re).collect());
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Forward transform (normalized by `1/n^3`) of a batch of real scalar fields.
/// The output spectra are exactly Hermitian.
pub(crate) fn scalars_to_spectral(grid: &PeriodicGrid, values: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let len = grid.len();
    let norm = 1.0 / len as f64;
    let mut out = Vec::with_capacity(values.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for pair in values.chunks(2) {
        match pair {
            [a, b] => {
                for ((z, x), y) in buf.iter_mut().zip(a.iter()).zip(b.iter()) {
                    *z = Complex64::new(*x, *y);
                }
                grid.fft3(&mut buf, false);
                let mut sa = vec![Complex64::new(0.0, 0.0); len];
                let mut sb = vec![Complex64::new(0.0, 0.0); len];
                for idx in 0..len {
                    let z = buf[idx];
                    let zc = buf[grid.conjugate_index(idx)].conj();
                    sa[idx] = 0.5 * (z + zc) * norm;
                    // (z - zc) / (2i)
                    let d = z - zc;
                    sb[idx] = Complex64::new(d.im, -d.re) * (0.5 * norm);
                }
                out.push(sa);
                out.push(sb);
            }
            [a] => {
                for (z, x) in buf.iter_mut().zip(a.iter()) {
                    *z = Complex64::new(*x, 0.0);
                }
                grid.fft3(&mut buf, false);
                let s = (0..len)
                    .map(|idx| 0.5 * (buf[idx] + buf[grid.conjugate_index(idx)].conj()) * norm)
                    .collect();
                out.push(s);
            }
            _ => unreachable!(),
        }
    }
    out
}

pub(crate) fn to_physical(grid: &PeriodicGrid, coeffs: &[CVec3]) -> Vec<[f64; 3]> {
    let comps: Vec<Vec<Complex64>> = (0..3).map(|c| coeffs.iter().map(|v| v[c]).collect()).collect();
    let refs: Vec<&[Complex64]> = comps.iter().map(|v| v.as_slice()).collect();
    let phys = scalars_to_physical(grid, &refs);
    (0..grid.len())
        .map(|p| [phys[0][p], phys[1][p], phys[2][p]])
        .collect()
}

/// Unmasked forward transform of a vector field.
pub(crate) fn to_spectral(grid: &PeriodicGrid, values: &[[f64; 3]]) -> Vec<CVec3> {
    let comps: Vec<Vec<f64>> = (0..3).map(|c| values.iter().map(|v| v[c]).collect()).collect();
    let refs: Vec<&[f64]> = comps.iter().map(|v| v.as_slice()).collect();
    let spec = scalars_to_spectral(grid, &refs);
    let mut out = vec![CVZERO; grid.len()];
    for (idx, v) in out.iter_mut().enumerate() {
        *v = [spec[0][idx], spec[1][idx], spec[2][idx]];
    }
    out
}
