//! Forward time integration and the containers shared by every time-dependent
//! solver: the time grid, piecewise-constant control schedules and state
//! trajectories.

mod energy;
mod solver;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{PeriodicGrid, PhysicalField, SpectralField};
use crate::vec3::Vec3;

pub use energy::{energy_balance_residual, write_energy_csv, EnergyBalance, EnergyRow};
pub use solver::{
    ingest_initial, solve_forward, solve_forward_with, step, write_trajectory_snapshots, SolverConfig,
    TimeScheme,
};
pub(crate) use solver::Stepper;

/// Uniform time grid on `[0, T]` with `N` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    dt: f64,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!("horizon T must be > 0, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("number of time steps must be positive"));
        }
        Ok(Self {
            steps,
            dt: horizon / steps as f64,
            horizon,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `t_n = n dt`
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }
}

/// Control `U(x, t)` held constant on each `[t_n, t_{n+1})`: one physical
/// frame per time step.
#[derive(Clone, Debug)]
pub struct ControlSchedule {
    time_grid: TimeGrid,
    frames: Vec<PhysicalField>,
}

impl ControlSchedule {
    pub fn new(time_grid: TimeGrid, frames: Vec<PhysicalField>) -> Result<Self> {
        if frames.len() != time_grid.steps() {
            return Err(Error::InputMismatch(format!(
                "control has {} frames for {} time steps",
                frames.len(),
                time_grid.steps()
            )));
        }
        for f in &frames[1..] {
            frames[0].grid().ensure_same(f.grid())?;
        }
        if frames.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("control contains non-finite values"));
        }
        Ok(Self { time_grid, frames })
    }

    pub fn zeros(grid: &PeriodicGrid, time_grid: TimeGrid) -> Self {
        Self {
            time_grid,
            frames: vec![PhysicalField::zeros(grid); time_grid.steps()],
        }
    }

    pub fn constant(time_grid: TimeGrid, frame: PhysicalField) -> Self {
        Self {
            time_grid,
            frames: vec![frame; time_grid.steps()],
        }
    }

    /// Samples `f(x, t_n)` at the left endpoint of every step.
    pub fn from_fn(grid: &PeriodicGrid, time_grid: TimeGrid, f: impl Fn([f64; 3], f64) -> Vec3) -> Self {
        let frames = (0..time_grid.steps())
            .map(|n| {
                let t = time_grid.time(n);
                PhysicalField::from_fn(grid, |x| f(x, t))
            })
            .collect();
        Self { time_grid, frames }
    }

    /// Independent uniform values in `[-amplitude, amplitude]`.
    pub fn random<R: Rng + ?Sized>(grid: &PeriodicGrid, time_grid: TimeGrid, rng: &mut R, amplitude: f64) -> Self {
        let frames = (0..time_grid.steps())
            .map(|_| PhysicalField::random(grid, rng, amplitude))
            .collect();
        Self { time_grid, frames }
    }

    /// Smooth random control: a random divergence-free field per frame plus a
    /// random gradient part, with RMS roughly `amplitude`.
    pub fn random_smooth<R: Rng + ?Sized>(
        grid: &PeriodicGrid,
        time_grid: TimeGrid,
        rng: &mut R,
        amplitude: f64,
    ) -> Self {
        let frames = (0..time_grid.steps())
            .map(|_| {
                let a = SpectralField::random_divfree(grid, rng, amplitude).to_physical();
                let b = SpectralField::random_divfree(grid, rng, 0.5 * amplitude).to_physical();
                let s: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                // a curl-free perturbation survives the solver's projection only
                // through the lambda term, which is what we want to exercise
                let g = PhysicalField::from_fn(grid, |x| {
                    let k = std::f64::consts::TAU / grid.length();
                    let v = (k * (x[0] + x[1]) + s).cos();
                    [v, v, 0.0]
                });
                let mut f = a;
                f.axpy(0.5, &b.map(|v| [v[1], v[2], v[0]]));
                f.axpy(0.3 * amplitude, &g);
                f
            })
            .collect();
        Self { time_grid, frames }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.frames[0].grid()
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn frames(&self) -> &[PhysicalField] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [PhysicalField] {
        &mut self.frames
    }

    pub fn frame(&self, n: usize) -> &PhysicalField {
        &self.frames[n]
    }

    pub fn into_frames(self) -> Vec<PhysicalField> {
        self.frames
    }

    pub fn ensure_compatible(&self, other: &ControlSchedule) -> Result<()> {
        if self.time_grid != other.time_grid {
            return Err(Error::InputMismatch("control schedules on different time grids".into()));
        }
        self.grid().ensure_same(other.grid())
    }

    /// `sum_n dt (U_n, V_n)`, the discrete `L2(0,T; L2)` inner product.
    pub fn inner(&self, other: &ControlSchedule) -> f64 {
        let s: f64 = self.frames.iter().zip(&other.frames).map(|(a, b)| a.inner(b)).sum();
        s * self.time_grid.dt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Largest absolute component over all points and frames.
    pub fn max_abs(&self) -> f64 {
        self.frames.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &ControlSchedule) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(|f| f.is_finite())
    }

    pub fn axpy(&mut self, a: f64, x: &ControlSchedule) {
        for (f, g) in self.frames.iter_mut().zip(&x.frames) {
            f.axpy(a, g);
        }
    }

    pub fn add(&self, other: &ControlSchedule) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ControlSchedule) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            time_grid: self.time_grid,
            frames: self.frames.iter().map(|f| f.scaled(a)).collect(),
        }
    }

    /// Applies `f(value, frame index, point index)` at every sample.
    pub fn map_points(&self, f: impl Fn(Vec3, usize, usize) -> Vec3) -> Self {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(n, fr)| {
                let vals = fr.values().iter().enumerate().map(|(p, v)| f(*v, n, p)).collect();
                PhysicalField::from_values_unchecked(fr.grid(), vals)
            })
            .collect();
        Self {
            time_grid: self.time_grid,
            frames,
        }
    }

    /// Applies `f(a, b, frame index, point index)` pairwise.
    pub fn zip_map(&self, other: &ControlSchedule, f: impl Fn(Vec3, Vec3, usize, usize) -> Vec3) -> Self {
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .enumerate()
            .map(|(n, (a, b))| {
                let vals = a
                    .values()
                    .iter()
                    .zip(b.values())
                    .enumerate()
                    .map(|(p, (x, y))| f(*x, *y, n, p))
                    .collect();
                PhysicalField::from_values_unchecked(a.grid(), vals)
            })
            .collect();
        Self {
            time_grid: self.time_grid,
            frames,
        }
    }

    /// Repeats every frame `factor` times on a refined time grid; the
    /// piecewise-constant control function is unchanged.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let tg = self.time_grid.refined(factor)?;
        let frames = self
            .frames
            .iter()
            .flat_map(|f| std::iter::repeat(f.clone()).take(factor))
            .collect();
        Ok(Self { time_grid: tg, frames })
    }
}

/// States `u_0, ..., u_N` of a forward or tangent solve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    time_grid: TimeGrid,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub(crate) fn from_states(time_grid: TimeGrid, states: Vec<SpectralField>) -> Self {
        debug_assert_eq!(states.len(), time_grid.steps() + 1);
        Self { time_grid, states }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.states[0].grid()
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &SpectralField {
        &self.states[n]
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn into_states(self) -> Vec<SpectralField> {
        self.states
    }

    /// Largest coefficient difference over all nodes.
    pub fn max_diff(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.max_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        Trajectory {
            time_grid: self.time_grid,
            states: self.states.iter().zip(&other.states).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    /// `sum_{n<N} dt ||grad x_n||^2`
    pub fn gradient_norm_sq(&self) -> f64 {
        let dt = self.time_grid.dt();
        self.states[..self.time_grid.steps()]
            .iter()
            .map(|s| dt * s.gradient_norm_sq())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn time_grid_invariants() {
        let tg = TimeGrid::new(0.5, 50).unwrap();
        assert!((tg.dt() * 50.0 - 0.5).abs() < 1e-15);
        assert_eq!(tg.time(50), 0.5);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 3).is_err());
    }

    #[test]
    fn schedule_shapes_and_inner_product() {
        let g = PeriodicGrid::new(4, 1.0).unwrap();
        let tg = TimeGrid::new(2.0, 4).unwrap();
        let c = ControlSchedule::constant(tg, PhysicalField::constant(&g, [1.0, 0.0, 0.0]));
        // ||U||^2 = T * |Omega| * 1
        assert!((c.l2_norm_sq() - 2.0).abs() < 1e-14);
        let bad = ControlSchedule::new(tg, vec![PhysicalField::zeros(&g); 3]);
        assert!(bad.is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        let fine = r.refined(3).unwrap();
        assert_eq!(fine.frames().len(), 12);
        assert!((fine.l2_norm_sq() - r.l2_norm_sq()).abs() < 1e-12 * r.l2_norm_sq());
    }
}
