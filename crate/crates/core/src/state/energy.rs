use std::io::Write;

use super::{ControlSchedule, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::operators::StateSample;
use crate::params::ModelParams;
use crate::state::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub l2: f64,
    pub v_norm: f64,
    /// `||u||_{L^{r+1}}` by collocation quadrature.
    pub lr_norm: f64,
    /// `(||u||^2 + mu ||grad u||^2) / 2`
    pub energy: f64,
    /// Continuous-form residual of the step ending at this node (0 at node 0).
    pub residual: f64,
}

/// Energy diagnostics of an IMEX Euler trajectory.
#[derive(Clone, Debug)]
pub struct EnergyBalance {
    pub rows: Vec<EnergyRow>,
    /// Per step, the relative defect of the scheme's own energy identity,
    /// obtained by testing the update against `u_{n+1}`.
    pub scheme_residuals: Vec<f64>,
    /// Per step, `(E_{n+1} - E_n)/dt + nu ||u_n||_V^2 + alpha ||u_n||^2
    /// + beta ||u_n||_{r+1}^{r+1} - (U_n, u_n)`.
    pub continuous_residuals: Vec<f64>,
}

impl EnergyBalance {
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    pub fn max_scheme_residual(&self) -> f64 {
        self.scheme_residuals.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max_continuous_residual(&self) -> f64 {
        self.continuous_residuals.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// `E_{n+1} < E_n` for every step.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy < w[0].energy)
    }
}

fn m_norm_sq(u: &SpectralField, mu: f64) -> f64 {
    u.l2_norm_sq() + mu * u.gradient_norm_sq()
}

/// Evaluates both energy balances for a trajectory produced by the IMEX
/// Euler scheme with the given control and parameters.
pub fn energy_balance_residual(
    traj: &Trajectory,
    control: &ControlSchedule,
    params: &ModelParams,
) -> Result<EnergyBalance> {
    energy_balance_with(traj, control, params, &SolverConfig::default())
}

pub(crate) fn energy_balance_with(
    traj: &Trajectory,
    control: &ControlSchedule,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<EnergyBalance> {
    let tg = *traj.time_grid();
    if tg != *control.time_grid() {
        return Err(Error::InputMismatch("trajectory and control on different time grids".into()));
    }
    traj.grid().ensure_same(control.grid())?;
    let st = Stepper::new(traj.grid(), params, tg.dt(), config)?;
    let dt = tg.dt();
    let mu = params.mu;
    let rp1 = params.r + 1.0;

    let rows: Vec<EnergyRow> = traj
        .states()
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let l2 = u.l2_norm_sq();
            let v = u.gradient_norm_sq();
            EnergyRow {
                step: n,
                time: tg.time(n),
                l2: l2.sqrt(),
                v_norm: v.sqrt(),
                lr_norm: u.to_physical().lp_norm_pow(rp1).powf(1.0 / rp1),
                energy: 0.5 * (l2 + mu * v),
                residual: 0.0,
            }
        })
        .collect();

    let mut scheme = Vec::with_capacity(tg.steps());
    let mut cont = Vec::with_capacity(tg.steps());
    for n in 0..tg.steps() {
        let (u, next) = (traj.state(n), traj.state(n + 1));
        let sample = StateSample::new(u);
        let q = st.control_term(control.frame(n));
        let mut forcing = q.clone();
        forcing.axpy(-1.0, &st.model.apply(&sample));

        let (e0, e1) = (rows[n].energy, rows[n + 1].energy);
        let jump = 0.5 * m_norm_sq(&next.sub(u), mu);
        let diss = dt * (params.nu * next.gradient_norm_sq() + params.alpha * next.l2_norm_sq());
        let work = dt * forcing.inner(next);
        let defect = (e1 - e0) + jump + diss - work;
        let scale = [e0, e1, jump, diss, work.abs()].into_iter().fold(0.0, f64::max);
        scheme.push(if scale > 0.0 { defect / scale } else { 0.0 });

        let damp = if params.beta != 0.0 {
            params.beta * u.to_physical().lp_norm_pow(rp1)
        } else {
            0.0
        };
        let rate = (e1 - e0) / dt
            + params.nu * u.gradient_norm_sq()
            + params.alpha * u.l2_norm_sq()
            + damp
            - q.inner(u);
        cont.push(rate);
    }
    let mut rows = rows;
    for (n, r) in cont.iter().enumerate() {
        rows[n + 1].residual = *r;
    }
    Ok(EnergyBalance {
        rows,
        scheme_residuals: scheme,
        continuous_residuals: cont,
    })
}

/// CSV with header `step,time,l2,v_norm,lr_norm,energy,residual`. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_energy_csv<W: Write>(mut w: W, balance: &EnergyBalance) -> std::io::Result<()> {
    writeln!(w, "step,time,l2,v_norm,lr_norm,energy,residual")?;
    for r in &balance.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.step, r.time, r.l2, r.v_norm, r.lr_norm, r.energy, r.residual
        )?;
    }
    w.flush()
}
