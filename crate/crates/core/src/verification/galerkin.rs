//! Reference integrator for the retained-mode Galerkin system, independent of
//! the FFT path: nonlinear terms by exact convolution over the mode set, the
//! control by a direct DFT, time stepping by classical RK4.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{CVec3, PeriodicGrid, SpectralField};
use crate::params::ModelParams;
use crate::state::{ControlSchedule, Trajectory};

const MAX_MODES: usize = 64;
const CZ: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Retained-mode ODE system `M u' = P U - D u - P[(u . grad) u + beta f(u)]`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    grid: PeriodicGrid,
    modes: Vec<[i64; 3]>,
    index: HashMap<[i64; 3], usize>,
    params: ModelParams,
    convection: bool,
}

impl GalerkinSystem {
    /// `modes` must exclude the mean mode and be closed under `m -> -m`.
    /// The damping term is evaluated exactly only for `r = 1` and `r = 3`.
    pub fn new(grid: &PeriodicGrid, modes: Vec<[i64; 3]>, params: ModelParams, convection: bool) -> Result<Self> {
        params.validate()?;
        if modes.len() > MAX_MODES {
            return Err(Error::invalid(format!(
                "Galerkin oracle supports at most {MAX_MODES} modes, got {}",
                modes.len()
            )));
        }
        if params.beta != 0.0 && params.r != 1.0 && params.r != 3.0 {
            return Err(Error::invalid(format!(
                "exact convolution of the damping term needs r = 1 or r = 3, got {}",
                params.r
            )));
        }
        let index: HashMap<[i64; 3], usize> = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        if index.len() != modes.len() {
            return Err(Error::invalid("duplicate modes in Galerkin set"));
        }
        for m in &modes {
            if *m == [0, 0, 0] {
                return Err(Error::invalid("the mean mode is not part of the velocity space"));
            }
            if !index.contains_key(&[-m[0], -m[1], -m[2]]) {
                return Err(Error::invalid(format!("mode set not closed under negation at {m:?}")));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            modes,
            index,
            params,
            convection,
        })
    }

    /// Every nonzero mode inside the grid's dealiasing mask.
    pub fn retained(grid: &PeriodicGrid, params: ModelParams, convection: bool) -> Result<Self> {
        let modes = (0..grid.len())
            .filter(|&i| grid.is_retained(i) && grid.k_sq(i) > 0.0)
            .map(|i| grid.mode(i))
            .collect();
        Self::new(grid, modes, params, convection)
    }

    pub fn modes(&self) -> &[[i64; 3]] {
        &self.modes
    }

    fn k(&self, m: [i64; 3]) -> [f64; 3] {
        let s = std::f64::consts::TAU / self.grid.length();
        [s * m[0] as f64, s * m[1] as f64, s * m[2] as f64]
    }

    fn leray(&self, m: [i64; 3], v: CVec3) -> CVec3 {
        let k = self.k(m);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let kv = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k2;
        [v[0] - kv * k[0], v[1] - kv * k[1], v[2] - kv * k[2]]
    }

    fn lookup(&self, m: [i64; 3]) -> Option<usize> {
        self.index.get(&m).copied()
    }

    /// Exact Fourier coefficients of `(u . grad) u + beta f(u)` on the mode set.
    fn nonlinear(&self, u: &[CVec3]) -> Vec<CVec3> {
        let nm = self.modes.len();
        let mut out = vec![[CZ; 3]; nm];
        let i = Complex64::new(0.0, 1.0);
        if self.convection {
            // (u . grad) u at k: sum_{p+q=k} (u_p . i q) u_q
            for (a, p) in self.modes.iter().enumerate() {
                for (b, q) in self.modes.iter().enumerate() {
                    let k = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
                    let Some(c) = self.lookup(k) else { continue };
                    let kq = self.k(*q);
                    let s = (u[a][0] * kq[0] + u[a][1] * kq[1] + u[a][2] * kq[2]) * i;
                    for d in 0..3 {
                        out[c][d] += s * u[b][d];
                    }
                }
            }
        }
        let beta = self.params.beta;
        if beta != 0.0 {
            if self.params.r == 1.0 {
                for (o, v) in out.iter_mut().zip(u) {
                    for d in 0..3 {
                        o[d] += v[d] * beta;
                    }
                }
            } else {
                // |u|^2 u at k: sum_{p+q+s=k} (u_p . u_q) u_s
                let mut dots: HashMap<[i64; 3], Complex64> = HashMap::new();
                for (a, p) in self.modes.iter().enumerate() {
                    for (b, q) in self.modes.iter().enumerate() {
                        let pq = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
                        let d = u[a][0] * u[b][0] + u[a][1] * u[b][1] + u[a][2] * u[b][2];
                        *dots.entry(pq).or_insert(CZ) += d;
                    }
                }
                for (pq, d) in &dots {
                    for (s_idx, s) in self.modes.iter().enumerate() {
                        let k = [pq[0] + s[0], pq[1] + s[1], pq[2] + s[2]];
                        let Some(c) = self.lookup(k) else { continue };
                        for e in 0..3 {
                            out[c][e] += *d * u[s_idx][e] * beta;
                        }
                    }
                }
            }
        }
        out
    }

    fn rhs(&self, u: &[CVec3], forcing: &[CVec3]) -> Vec<CVec3> {
        let nl = self.nonlinear(u);
        let p = &self.params;
        self.modes
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let k = self.k(*m);
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                let mass = 1.0 + p.mu * k2;
                let diss = p.nu * k2 + p.alpha;
                let pn = self.leray(*m, nl[j]);
                let mut out = [CZ; 3];
                for d in 0..3 {
                    out[d] = (forcing[j][d] - u[j][d] * diss - pn[d]) / mass;
                }
                out
            })
            .collect()
    }

    /// Projected control coefficients by direct summation.
    fn control_modes(&self, frame: &crate::fields::PhysicalField) -> Vec<CVec3> {
        let grid = frame.grid();
        let inv = 1.0 / grid.len() as f64;
        self.modes
            .iter()
            .map(|m| {
                let k = self.k(*m);
                let mut acc = [CZ; 3];
                for (idx, v) in frame.values().iter().enumerate() {
                    let x = grid.point(idx);
                    let phase = -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
                    let e = Complex64::from_polar(inv, phase);
                    for d in 0..3 {
                        acc[d] += e * v[d];
                    }
                }
                self.leray(*m, acc)
            })
            .collect()
    }

    fn to_field(&self, u: &[CVec3]) -> SpectralField {
        let mut s = SpectralField::zeros(&self.grid);
        for (m, v) in self.modes.iter().zip(u) {
            s.coeffs_mut()[self.grid.mode_index(*m)] = *v;
        }
        s
    }
}

/// Integrates the Galerkin system with RK4 at step `<= fine_dt`, sampling at
/// the control's time nodes. `u0` is restricted to the mode set.
pub fn galerkin_reference_solve(
    sys: &GalerkinSystem,
    u0: &SpectralField,
    control: &ControlSchedule,
    fine_dt: f64,
) -> Result<Trajectory> {
    sys.grid.ensure_same(u0.grid())?;
    sys.grid.ensure_same(control.grid())?;
    let tg = *control.time_grid();
    if !(fine_dt > 0.0) || fine_dt > tg.dt() {
        return Err(Error::invalid(format!("fine_dt must lie in (0, dt], got {fine_dt}")));
    }
    let sub = (tg.dt() / fine_dt).ceil() as usize;
    let h = tg.dt() / sub as f64;
    let mut u: Vec<CVec3> = sys
        .modes
        .iter()
        .map(|m| sys.leray(*m, u0.coeffs()[sys.grid.mode_index(*m)]))
        .collect();
    let mut states = vec![sys.to_field(&u)];
    let axpy = |a: &[CVec3], s: f64, b: &[CVec3]| -> Vec<CVec3> {
        a.iter()
            .zip(b)
            .map(|(x, y)| [x[0] + y[0] * s, x[1] + y[1] * s, x[2] + y[2] * s])
            .collect()
    };
    for n in 0..tg.steps() {
        let f = sys.control_modes(control.frame(n));
        for _ in 0..sub {
            let k1 = sys.rhs(&u, &f);
            let k2 = sys.rhs(&axpy(&u, 0.5 * h, &k1), &f);
            let k3 = sys.rhs(&axpy(&u, 0.5 * h, &k2), &f);
            let k4 = sys.rhs(&axpy(&u, h, &k3), &f);
            for j in 0..u.len() {
                for d in 0..3 {
                    u[j][d] += (k1[j][d] + (k2[j][d] + k3[j][d]) * 2.0 + k4[j][d]) * (h / 6.0);
                }
            }
        }
        if u.iter().any(|v| v.iter().any(|z| !z.is_finite())) {
            return Err(Error::Integration {
                step: n + 1,
                reason: "Galerkin reference integration produced non-finite values".into(),
            });
        }
        states.push(sys.to_field(&u));
    }
    Ok(Trajectory::from_states(tg, states))
}
