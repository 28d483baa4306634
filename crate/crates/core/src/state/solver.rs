use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ControlSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::fields::snapshot::{save_snapshot, SnapshotKind};
use crate::fields::{PeriodicGrid, PhysicalField, SpectralField};
use crate::operators::{NonlinearModel, StateSample};
use crate::params::ModelParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Implicit `nu A + alpha`, explicit convection and damping.
    #[default]
    ImexEuler,
    /// Crank-Nicolson on the linear part, Adams-Bashforth 2 on the nonlinear
    /// part, started by one Euler step. Forward solves only.
    Cnab,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: TimeScheme,
    /// Abort when `max_x |u_n(x)|` exceeds this.
    pub blowup_bound: f64,
    pub convection: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::ImexEuler,
            blowup_bound: 1e8,
            convection: true,
        }
    }
}

/// Per-mode coefficients of the IMEX update, shared by the forward, tangent
/// and adjoint sweeps so all of them use bitwise the same arithmetic.
pub(crate) struct Stepper {
    pub grid: PeriodicGrid,
    pub dt: f64,
    pub model: NonlinearModel,
    pub blowup_bound: f64,
    /// `1 + mu |k|^2`
    pub mass: Vec<f64>,
    /// `nu |k|^2 + alpha`
    pub dissipation: Vec<f64>,
    /// `mass + dt * dissipation`
    pub implicit: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &PeriodicGrid, params: &ModelParams, dt: f64, config: &SolverConfig) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("time step must be > 0, got {dt}")));
        }
        let k2 = grid.k_sq_table();
        let mass: Vec<f64> = k2.iter().map(|k| 1.0 + params.mu * k).collect();
        let dissipation: Vec<f64> = k2.iter().map(|k| params.nu * k + params.alpha).collect();
        let implicit = mass.iter().zip(&dissipation).map(|(m, d)| m + dt * d).collect();
        Ok(Self {
            grid: grid.clone(),
            dt,
            model: NonlinearModel::from_params(params).with_convection(config.convection),
            blowup_bound: config.blowup_bound,
            mass,
            dissipation,
            implicit,
        })
    }

    /// `P_N P F U`: the part of the control that reaches the state equation.
    pub fn control_term(&self, control: &PhysicalField) -> SpectralField {
        let mut s = control.to_spectral();
        s.leray_project_in_place();
        s
    }

    /// `(M + dt D)^{-1} (M prev + dt forcing)`
    pub fn advance(&self, prev: &SpectralField, forcing: &SpectralField) -> SpectralField {
        let dt = self.dt;
        let coeffs = prev
            .coeffs()
            .iter()
            .zip(forcing.coeffs())
            .enumerate()
            .map(|(idx, (p, f))| {
                let (m, a) = (self.mass[idx], self.implicit[idx]);
                let mut out = [Complex64::new(0.0, 0.0); 3];
                for c in 0..3 {
                    out[c] = (p[c] * m + f[c] * dt) / a;
                }
                out
            })
            .collect();
        SpectralField::from_coeffs(&self.grid, coeffs).expect("sizes agree")
    }

    pub fn check(&self, step: usize, sample: &StateSample) -> Result<()> {
        let m = sample.max_norm();
        if m.is_finite() && m <= self.blowup_bound {
            Ok(())
        } else {
            Err(Error::Integration {
                step,
                reason: format!("max |u| = {m:e} exceeds the blow-up bound {:e}", self.blowup_bound),
            })
        }
    }

    pub fn check_field(&self, step: usize, u: &SpectralField) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Integration {
                step,
                reason: "non-finite coefficients".into(),
            });
        }
        self.check(step, &StateSample::new(u))
    }

    /// One IMEX Euler step from a pre-sampled state.
    pub fn euler_step(&self, u: &SpectralField, sample: &StateSample, control: &PhysicalField) -> SpectralField {
        let mut forcing = self.control_term(control);
        forcing.axpy(-1.0, &self.model.apply(sample));
        self.advance(u, &forcing)
    }
}

/// Projects onto real, divergence-free, zero-mean fields inside the
/// dealiasing mask.
pub fn ingest_initial(u0: &SpectralField) -> SpectralField {
    let mut u = u0.hermitian_part();
    u.project_dealias_in_place();
    u
}

/// One IMEX Euler step
/// `(M + dt D) u_{n+1} = M u_n + dt (P_N P U_n - N(u_n))`.
pub fn step(u_n: &SpectralField, control: &PhysicalField, params: &ModelParams, dt: f64) -> Result<SpectralField> {
    u_n.grid().ensure_same(control.grid())?;
    let st = Stepper::new(u_n.grid(), params, dt, &SolverConfig::default())?;
    let sample = StateSample::new(u_n);
    st.check(0, &sample)?;
    let next = st.euler_step(u_n, &sample, control);
    st.check_field(1, &next)?;
    Ok(next)
}

pub fn solve_forward(u0: &SpectralField, control: &ControlSchedule, params: &ModelParams) -> Result<Trajectory> {
    solve_forward_with(u0, control, params, &SolverConfig::default())
}

pub fn solve_forward_with(
    u0: &SpectralField,
    control: &ControlSchedule,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<Trajectory> {
    u0.grid().ensure_same(control.grid())?;
    let tg = *control.time_grid();
    let st = Stepper::new(u0.grid(), params, tg.dt(), config)?;
    let mut states = Vec::with_capacity(tg.steps() + 1);
    states.push(ingest_initial(u0));
    let mut prev_explicit: Option<SpectralField> = None;
    for n in 0..tg.steps() {
        let u = &states[n];
        let sample = StateSample::new(u);
        st.check(n, &sample)?;
        let next = match (config.scheme, prev_explicit.as_ref()) {
            (TimeScheme::ImexEuler, _) | (TimeScheme::Cnab, None) => {
                let next = st.euler_step(u, &sample, control.frame(n));
                if config.scheme == TimeScheme::Cnab {
                    prev_explicit = Some(st.model.apply(&sample));
                }
                next
            }
            (TimeScheme::Cnab, Some(prev)) => {
                let nl = st.model.apply(&sample);
                let next = cnab_step(&st, u, &nl, prev, control.frame(n));
                prev_explicit = Some(nl);
                next
            }
        };
        states.push(next);
    }
    st.check_field(tg.steps(), states.last().expect("nonempty"))?;
    Ok(Trajectory::from_states(tg, states))
}

/// `(M + dt/2 D) u_{n+1} = (M - dt/2 D) u_n + dt (P U_n - 3/2 N_n + 1/2 N_{n-1})`
fn cnab_step(
    st: &Stepper,
    u: &SpectralField,
    nl: &SpectralField,
    nl_prev: &SpectralField,
    control: &PhysicalField,
) -> SpectralField {
    let dt = st.dt;
    let mut forcing = st.control_term(control);
    forcing.axpy(-1.5, nl);
    forcing.axpy(0.5, nl_prev);
    let coeffs = u
        .coeffs()
        .iter()
        .zip(forcing.coeffs())
        .enumerate()
        .map(|(idx, (p, f))| {
            let (m, d) = (st.mass[idx], st.dissipation[idx]);
            let lhs = m + 0.5 * dt * d;
            let rhs = m - 0.5 * dt * d;
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for c in 0..3 {
                out[c] = (p[c] * rhs + f[c] * dt) / lhs;
            }
            out
        })
        .collect();
    SpectralField::from_coeffs(&st.grid, coeffs).expect("sizes agree")
}

/// Writes `state_NNNNN.bin` for every `every`-th node and the final node.
pub fn write_trajectory_snapshots(dir: &Path, traj: &Trajectory, every: usize) -> Result<Vec<PathBuf>> {
    if every == 0 {
        return Err(Error::invalid("snapshot cadence must be positive"));
    }
    std::fs::create_dir_all(dir)?;
    let tg = traj.time_grid();
    let mut paths = Vec::new();
    for (n, s) in traj.states().iter().enumerate() {
        if n % every == 0 || n == tg.steps() {
            let p = dir.join(format!("state_{n:05}.bin"));
            save_snapshot(&p, SnapshotKind::State, tg.time(n), &s.to_physical())?;
            paths.push(p);
        }
    }
    Ok(paths)
}
