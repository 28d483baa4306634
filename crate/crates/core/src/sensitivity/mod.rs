//! Tangent, adjoint and second-order adjoint sweeps of the IMEX Euler scheme.
//!
//! With `A = M + dt D` the forward step is
//! `A u_{n+1} = M u_n + dt (Q U_n - N(u_n))` and the tracking cost weights
//! node `n` by `dt` for `n < N` and by 0 at `n = N`. The adjoint recursion is
//! the exact transpose:
//!
//! ```text
//! A phi_n = M phi_{n+1} - dt N'(u_{n+1})^T phi_{n+1} + c_{n+1} kappa K (u_{n+1} - ud_{n+1}),
//! phi_N = 0,  c_m = dt for m < N, c_N = 0,
//! ```
//!
//! so the gradient with respect to `U_n` in the `sum_n dt (., .)` inner
//! product is `phi_n + lambda U_n`. Because `c_N = 0`, `phi_{N-1}` is zero as
//! well: the last control frame only enters the cost through `lambda`.

mod checkpoint;

use std::path::{Path, PathBuf};

pub use checkpoint::solve_adjoint_checkpointed;

use crate::error::{Error, Result};
use crate::fields::snapshot::{save_snapshot, SnapshotKind};
use crate::fields::{PeriodicGrid, PhysicalField, SpectralField};
use crate::operators::StateSample;
use crate::params::ModelParams;
use crate::state::{ingest_initial, ControlSchedule, SolverConfig, Stepper, TimeGrid, TimeScheme, Trajectory};

/// Desired velocity `u_d` at every time node.
#[derive(Clone, Debug)]
pub struct TargetField {
    time_grid: TimeGrid,
    frames: Vec<SpectralField>,
}

impl TargetField {
    /// Frames are projected onto real, divergence-free, dealiased fields.
    pub fn new(time_grid: TimeGrid, frames: Vec<SpectralField>) -> Result<Self> {
        if frames.len() != time_grid.steps() + 1 {
            return Err(Error::InputMismatch(format!(
                "target has {} frames for {} time nodes",
                frames.len(),
                time_grid.steps() + 1
            )));
        }
        for f in &frames[1..] {
            frames[0].grid().ensure_same(f.grid())?;
        }
        Ok(Self {
            time_grid,
            frames: frames.iter().map(ingest_initial).collect(),
        })
    }

    pub fn zeros(grid: &PeriodicGrid, time_grid: TimeGrid) -> Self {
        Self {
            time_grid,
            frames: vec![SpectralField::zeros(grid); time_grid.steps() + 1],
        }
    }

    pub fn constant(time_grid: TimeGrid, frame: &SpectralField) -> Self {
        Self {
            time_grid,
            frames: vec![ingest_initial(frame); time_grid.steps() + 1],
        }
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            time_grid: *traj.time_grid(),
            frames: traj.states().to_vec(),
        }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.frames[0].grid()
    }

    pub fn frames(&self) -> &[SpectralField] {
        &self.frames
    }

    pub fn frame(&self, n: usize) -> &SpectralField {
        &self.frames[n]
    }

    pub(crate) fn ensure_matches(&self, traj: &Trajectory) -> Result<()> {
        if self.time_grid != *traj.time_grid() {
            return Err(Error::InputMismatch("target and trajectory on different time grids".into()));
        }
        self.grid().ensure_same(traj.grid())
    }
}

/// Costates `phi_0, ..., phi_N`.
#[derive(Clone, Debug)]
pub struct AdjointTrajectory {
    time_grid: TimeGrid,
    costates: Vec<SpectralField>,
}

impl AdjointTrajectory {
    pub(crate) fn from_costates(time_grid: TimeGrid, costates: Vec<SpectralField>) -> Self {
        debug_assert_eq!(costates.len(), time_grid.steps() + 1);
        Self { time_grid, costates }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.costates[0].grid()
    }

    pub fn costates(&self) -> &[SpectralField] {
        &self.costates
    }

    pub fn costate(&self, n: usize) -> &SpectralField {
        &self.costates[n]
    }

    /// `phi_n` in physical space for each control frame `n < N`; this is the
    /// state-equation part of the reduced gradient.
    pub fn to_control(&self) -> ControlSchedule {
        let frames: Vec<PhysicalField> = self.costates[..self.time_grid.steps()]
            .iter()
            .map(|c| c.to_physical())
            .collect();
        ControlSchedule::new(self.time_grid, frames).expect("costates are finite")
    }

    /// `max_n ||phi_n||_V` (gradient seminorm).
    pub fn max_v_norm(&self) -> f64 {
        self.costates.iter().map(|c| c.gradient_norm_sq().sqrt()).fold(0.0, f64::max)
    }

    /// `max_n ||phi_n||_H`
    pub fn max_h_norm(&self) -> f64 {
        self.costates.iter().map(|c| c.l2_norm_sq().sqrt()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &AdjointTrajectory) -> f64 {
        self.costates
            .iter()
            .zip(&other.costates)
            .map(|(a, b)| a.max_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.costates.iter().all(|c| c.max_abs_coeff() == 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SensitivityOptions {
    /// Must use the IMEX Euler scheme; the convection switch and blow-up
    /// bound are honoured.
    pub solver: SolverConfig,
    /// Negates the transport term of the adjoint. Mutation testing only.
    pub flip_transport: bool,
}

impl SensitivityOptions {
    pub fn with_solver(solver: SolverConfig) -> Self {
        Self {
            solver,
            flip_transport: false,
        }
    }
}

pub(crate) fn stepper_for(traj_grid: &PeriodicGrid, tg: &TimeGrid, params: &ModelParams, opts: &SensitivityOptions) -> Result<Stepper> {
    if opts.solver.scheme != TimeScheme::ImexEuler {
        return Err(Error::invalid(
            "sensitivity solvers are only available for the imex-euler scheme",
        ));
    }
    Stepper::new(traj_grid, params, tg.dt(), &opts.solver)
}

fn check_costate(st: &Stepper, step: usize, phys: &PhysicalField) -> Result<()> {
    let m = phys.max_norm();
    if m.is_finite() && m <= st.blowup_bound {
        Ok(())
    } else {
        Err(Error::Integration {
            step,
            reason: format!("costate max |phi| = {m:e} exceeds the blow-up bound"),
        })
    }
}

/// Tangent of the control-to-state map in direction `v`, `w_0 = 0`.
pub fn solve_linearized(base: &Trajectory, v: &ControlSchedule, params: &ModelParams) -> Result<Trajectory> {
    solve_linearized_with(base, v, params, &SensitivityOptions::default())
}

pub fn solve_linearized_with(
    base: &Trajectory,
    v: &ControlSchedule,
    params: &ModelParams,
    opts: &SensitivityOptions,
) -> Result<Trajectory> {
    let tg = *base.time_grid();
    if tg != *v.time_grid() {
        return Err(Error::InputMismatch("direction and trajectory on different time grids".into()));
    }
    base.grid().ensure_same(v.grid())?;
    let st = stepper_for(base.grid(), &tg, params, opts)?;
    let mut states = Vec::with_capacity(tg.steps() + 1);
    states.push(SpectralField::zeros(base.grid()));
    for n in 0..tg.steps() {
        let w = &states[n];
        let ws = StateSample::new(w);
        st.check(n, &ws)?;
        let us = StateSample::new(base.state(n));
        let mut forcing = st.control_term(v.frame(n));
        forcing.axpy(-1.0, &st.model.tangent(&us, &ws));
        states.push(st.advance(w, &forcing));
    }
    st.check_field(tg.steps(), states.last().expect("nonempty"))?;
    Ok(Trajectory::from_states(tg, states))
}

/// One backward step of the adjoint recursion at node `m = n + 1`.
pub(crate) fn adjoint_step(
    st: &Stepper,
    steps: usize,
    m: usize,
    u_m: &SpectralField,
    ud_m: &SpectralField,
    phi_m: &SpectralField,
    kappa: f64,
    flip: bool,
) -> Result<SpectralField> {
    let us = StateSample::new(u_m);
    let phi_phys = phi_m.to_physical();
    check_costate(st, m, &phi_phys)?;
    let mut forcing = st.model.adjoint(&us, phi_phys.values(), flip);
    forcing.scale(-1.0);
    if m < steps && kappa != 0.0 {
        let misfit = u_m.sub(ud_m);
        let k2 = st.grid.k_sq_table();
        let src = misfit.map_modes(|idx, c| {
            let s = kappa * k2[idx];
            [c[0] * s, c[1] * s, c[2] * s]
        });
        forcing.axpy(1.0, &src);
    }
    Ok(st.advance(phi_m, &forcing))
}

/// Backward adjoint sweep for the tracking term with weight `kappa`.
pub fn solve_adjoint(
    base: &Trajectory,
    target: &TargetField,
    params: &ModelParams,
    kappa: f64,
) -> Result<AdjointTrajectory> {
    solve_adjoint_with(base, target, params, kappa, &SensitivityOptions::default())
}

pub fn solve_adjoint_with(
    base: &Trajectory,
    target: &TargetField,
    params: &ModelParams,
    kappa: f64,
    opts: &SensitivityOptions,
) -> Result<AdjointTrajectory> {
    target.ensure_matches(base)?;
    let tg = *base.time_grid();
    let st = stepper_for(base.grid(), &tg, params, opts)?;
    let steps = tg.steps();
    let mut costates = vec![SpectralField::zeros(base.grid()); steps + 1];
    for n in (0..steps).rev() {
        costates[n] = adjoint_step(
            &st,
            steps,
            n + 1,
            base.state(n + 1),
            target.frame(n + 1),
            &costates[n + 1],
            kappa,
            opts.flip_transport,
        )?;
    }
    Ok(AdjointTrajectory::from_costates(tg, costates))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityCheck {
    /// `kappa sum_n dt (grad w_n, grad (u_n - ud_n))`
    pub lhs: f64,
    /// `sum_n dt (phi_n, V_n)`
    pub rhs: f64,
    pub rel_err: f64,
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn duality_check(
    base: &Trajectory,
    v: &ControlSchedule,
    target: &TargetField,
    params: &ModelParams,
    kappa: f64,
) -> Result<DualityCheck> {
    duality_check_with(base, v, target, params, kappa, &SensitivityOptions::default())
}

pub fn duality_check_with(
    base: &Trajectory,
    v: &ControlSchedule,
    target: &TargetField,
    params: &ModelParams,
    kappa: f64,
    opts: &SensitivityOptions,
) -> Result<DualityCheck> {
    let w = solve_linearized_with(base, v, params, opts)?;
    let phi = solve_adjoint_with(base, target, params, kappa, opts)?;
    let tg = base.time_grid();
    let dt = tg.dt();
    let lhs: f64 = (0..tg.steps())
        .map(|n| dt * kappa * w.state(n).gradient_inner(&base.state(n).sub(target.frame(n))))
        .sum();
    let rhs = phi.to_control().inner(v);
    Ok(DualityCheck {
        lhs,
        rhs,
        rel_err: relative_gap(lhs, rhs),
    })
}

/// Derivative of the adjoint sweep along the tangent `w`; requires `r >= 2`.
pub fn solve_second_adjoint(
    base: &Trajectory,
    adjoint: &AdjointTrajectory,
    w: &Trajectory,
    params: &ModelParams,
    kappa: f64,
) -> Result<AdjointTrajectory> {
    solve_second_adjoint_with(base, adjoint, w, params, kappa, &SensitivityOptions::default())
}

pub fn solve_second_adjoint_with(
    base: &Trajectory,
    adjoint: &AdjointTrajectory,
    w: &Trajectory,
    params: &ModelParams,
    kappa: f64,
    opts: &SensitivityOptions,
) -> Result<AdjointTrajectory> {
    if params.r < 2.0 {
        return Err(Error::invalid(format!(
            "second-order adjoint requires r >= 2, got {}",
            params.r
        )));
    }
    let tg = *base.time_grid();
    if tg != *adjoint.time_grid() || tg != *w.time_grid() {
        return Err(Error::InputMismatch("second adjoint inputs on different time grids".into()));
    }
    base.grid().ensure_same(adjoint.grid())?;
    base.grid().ensure_same(w.grid())?;
    let st = stepper_for(base.grid(), &tg, params, opts)?;
    let steps = tg.steps();
    let k2 = st.grid.k_sq_table().to_vec();
    let mut out = vec![SpectralField::zeros(base.grid()); steps + 1];
    for n in (0..steps).rev() {
        let m = n + 1;
        let us = StateSample::new(base.state(m));
        let ws = StateSample::new(w.state(m));
        let dphi = out[m].to_physical();
        check_costate(&st, m, &dphi)?;
        let phi = adjoint.costate(m).to_physical();
        let mut forcing = st.model.adjoint(&us, dphi.values(), false);
        forcing.axpy(1.0, &st.model.adjoint_derivative(&us, &ws, phi.values()));
        forcing.scale(-1.0);
        if m < steps && kappa != 0.0 {
            let src = w.state(m).map_modes(|idx, c| {
                let s = kappa * k2[idx];
                [c[0] * s, c[1] * s, c[2] * s]
            });
            forcing.axpy(1.0, &src);
        }
        out[n] = st.advance(&out[m], &forcing);
    }
    Ok(AdjointTrajectory::from_costates(tg, out))
}

/// Writes `costate_NNNNN.bin` for every `every`-th node and the final node.
pub fn write_costate_snapshots(dir: &Path, adj: &AdjointTrajectory, every: usize) -> Result<Vec<PathBuf>> {
    if every == 0 {
        return Err(Error::invalid("snapshot cadence must be positive"));
    }
    std::fs::create_dir_all(dir)?;
    let tg = adj.time_grid();
    let mut paths = Vec::new();
    for (n, c) in adj.costates().iter().enumerate() {
        if n % every == 0 || n == tg.steps() {
            let p = dir.join(format!("costate_{n:05}.bin"));
            save_snapshot(&p, SnapshotKind::Costate, tg.time(n), &c.to_physical())?;
            paths.push(p);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::solve_forward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    struct Case {
        base: Trajectory,
        v: ControlSchedule,
        target: TargetField,
        params: ModelParams,
    }

    fn case(r: f64, seed: u64) -> Case {
        let g = PeriodicGrid::new(8, 2.0 * PI).unwrap();
        let tg = TimeGrid::new(0.2, 10).unwrap();
        let params = ModelParams::new(0.1, 0.05, 0.5, 0.8, r, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = SpectralField::random_divfree(&g, &mut rng, 1.0);
        let u = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        let v = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        let ud = SpectralField::random_divfree(&g, &mut rng, 0.5);
        let base = solve_forward(&u0, &u, &params).unwrap();
        Case {
            base,
            v,
            target: TargetField::constant(tg, &ud),
            params,
        }
    }

    #[test]
    fn duality_holds_to_roundoff() {
        for (i, r) in [1.0, 2.0, 3.0, 5.0].into_iter().enumerate() {
            let c = case(r, 10 + i as u64);
            let d = duality_check(&c.base, &c.v, &c.target, &c.params, 1.3).unwrap();
            assert!(d.rel_err < 1e-12, "r = {r}: {d:?}");
        }
    }

    #[test]
    fn flipped_transport_breaks_duality() {
        let c = case(3.0, 4);
        let opts = SensitivityOptions {
            flip_transport: true,
            ..Default::default()
        };
        let d = duality_check_with(&c.base, &c.v, &c.target, &c.params, 1.0, &opts).unwrap();
        assert!(d.rel_err > 1e-4, "{d:?}");
    }

    #[test]
    fn terminal_costates_vanish() {
        let c = case(3.0, 5);
        let phi = solve_adjoint(&c.base, &c.target, &c.params, 1.0).unwrap();
        assert_eq!(phi.costate(10).max_abs_coeff(), 0.0);
        assert_eq!(phi.costate(9).max_abs_coeff(), 0.0);
        assert!(phi.costate(0).max_abs_coeff() > 0.0);
        for s in phi.costates() {
            assert!(s.divergence_residual() < 1e-13);
        }
    }

    #[test]
    fn adjoint_vanishes_on_target() {
        let c = case(2.5, 6);
        let target = TargetField::from_trajectory(&c.base);
        let phi = solve_adjoint(&c.base, &target, &c.params, 3.0).unwrap();
        assert!(phi.is_zero());
    }

    #[test]
    fn linearized_is_linear() {
        let c = case(3.0, 7);
        let w1 = solve_linearized(&c.base, &c.v, &c.params).unwrap();
        let w2 = solve_linearized(&c.base, &c.v.scaled(-2.5), &c.params).unwrap();
        let mut sum = w1.states()[10].scaled(-2.5);
        sum.axpy(-1.0, w2.final_state());
        assert!(sum.max_abs_coeff() < 1e-13 * w1.final_state().max_abs_coeff().max(1.0));
        let z = ControlSchedule::zeros(c.base.grid(), *c.base.time_grid());
        assert_eq!(solve_linearized(&c.base, &z, &c.params).unwrap().final_state().max_abs_coeff(), 0.0);
    }

    #[test]
    fn second_adjoint_rejects_small_r() {
        let c = case(1.5, 8);
        let phi = solve_adjoint(&c.base, &c.target, &c.params, 1.0).unwrap();
        let w = solve_linearized(&c.base, &c.v, &c.params).unwrap();
        assert!(solve_second_adjoint(&c.base, &phi, &w, &c.params, 1.0).is_err());
    }
}
