//! Tracking cost, reduced gradient, box constraints, the projected-gradient
//! optimizer and first-, second-order and global optimality diagnostics.
//!
//! Controls live in raw physical space: bounds are imposed pointwise on `U`
//! itself and the solver applies the Leray projection internally.

mod diagnostics;
mod optimizer;

pub use diagnostics::{
    bang_bang_classify, critical_cone_project, global_optimality_diagnostic, hessian_vector,
    in_critical_cone, projection_residual, second_order_check, BangBangLabel, BangBangMap,
    GlobalConstants, GlobalDiagnostic, GlobalVerdict, SecondOrderReport, SecondOrderStatus,
};
pub use optimizer::{
    optimize, write_iteration_log, IterationRecord, OptimizationResult, OptimalityReport, OptimizerConfig,
    RunStatus,
};

use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::params::ModelParams;
use crate::sensitivity::{
    solve_adjoint_with, solve_linearized_with, solve_second_adjoint_with, AdjointTrajectory, SensitivityOptions,
    TargetField,
};
use crate::state::{ingest_initial, solve_forward_with, ControlSchedule, SolverConfig, TimeGrid, Trajectory};
use crate::vec3::Vec3;

/// Weights of `J = kappa/2 int ||grad(u - u_d)||^2 + lambda/2 int ||U||^2`.
#[derive(Clone, Debug)]
pub struct CostConfig {
    pub kappa: f64,
    pub lambda: f64,
    pub target: TargetField,
}

impl CostConfig {
    pub fn new(kappa: f64, lambda: f64, target: TargetField) -> Result<Self> {
        let c = Self { kappa, lambda, target };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.kappa == 0.0 && self.lambda == 0.0 {
            return Err(Error::invalid("kappa and lambda must not both be zero"));
        }
        Ok(())
    }
}

/// One side of a box constraint.
#[derive(Clone, Debug)]
pub enum Bound {
    /// Same value for every point, component and step.
    Uniform(f64),
    /// Per point, component and step.
    Field(ControlSchedule),
}

impl Bound {
    #[inline]
    fn at(&self, n: usize, p: usize, c: usize) -> f64 {
        match self {
            Bound::Uniform(v) => *v,
            Bound::Field(f) => f.frame(n).values()[p][c],
        }
    }
}

/// `u_min <= U <= u_max` componentwise.
#[derive(Clone, Debug)]
pub struct BoxConstraints {
    lower: Bound,
    upper: Bound,
}

impl BoxConstraints {
    pub fn uniform(u_min: f64, u_max: f64) -> Result<Self> {
        if u_min.is_nan() || u_max.is_nan() || u_min > u_max {
            return Err(Error::invalid(format!("box requires u_min <= u_max, got [{u_min}, {u_max}]")));
        }
        Ok(Self {
            lower: Bound::Uniform(u_min),
            upper: Bound::Uniform(u_max),
        })
    }

    pub fn unbounded() -> Self {
        Self {
            lower: Bound::Uniform(f64::NEG_INFINITY),
            upper: Bound::Uniform(f64::INFINITY),
        }
    }

    pub fn new(lower: Bound, upper: Bound) -> Result<Self> {
        let b = Self { lower, upper };
        let (steps, len) = match (&b.lower, &b.upper) {
            (Bound::Field(f), Bound::Field(g)) => {
                f.ensure_compatible(g)?;
                (f.time_grid().steps(), f.grid().len())
            }
            (Bound::Field(f), _) | (_, Bound::Field(f)) => (f.time_grid().steps(), f.grid().len()),
            _ => (1, 1),
        };
        for n in 0..steps {
            for p in 0..len {
                for c in 0..3 {
                    let (lo, hi) = (b.lower.at(n, p, c), b.upper.at(n, p, c));
                    if lo.is_nan() || hi.is_nan() || lo > hi {
                        return Err(Error::invalid(format!(
                            "box requires u_min <= u_max, violated at step {n}, point {p}"
                        )));
                    }
                }
            }
        }
        Ok(b)
    }

    pub fn lower(&self) -> &Bound {
        &self.lower
    }

    pub fn upper(&self) -> &Bound {
        &self.upper
    }

    #[inline]
    pub fn bounds_at(&self, n: usize, p: usize, c: usize) -> (f64, f64) {
        (self.lower.at(n, p, c), self.upper.at(n, p, c))
    }

    fn ensure_fits(&self, control: &ControlSchedule) -> Result<()> {
        for b in [&self.lower, &self.upper] {
            if let Bound::Field(f) = b {
                f.ensure_compatible(control)?;
            }
        }
        Ok(())
    }

    /// Largest finite `u_max - u_min`, or 1 if the box is unbounded.
    pub fn width_scale(&self) -> f64 {
        let w = match (&self.lower, &self.upper) {
            (Bound::Uniform(a), Bound::Uniform(b)) => b - a,
            _ => {
                let f = match (&self.lower, &self.upper) {
                    (Bound::Field(f), _) | (_, Bound::Field(f)) => f,
                    _ => unreachable!(),
                };
                let mut w: f64 = 0.0;
                for n in 0..f.time_grid().steps() {
                    for p in 0..f.grid().len() {
                        for c in 0..3 {
                            let (lo, hi) = self.bounds_at(n, p, c);
                            if (hi - lo).is_finite() {
                                w = w.max(hi - lo);
                            }
                        }
                    }
                }
                w
            }
        };
        if w.is_finite() && w > 0.0 {
            w
        } else {
            1.0
        }
    }

    /// Componentwise feasibility with slack `tol`.
    pub fn contains(&self, control: &ControlSchedule, tol: f64) -> bool {
        control.frames().iter().enumerate().all(|(n, f)| {
            f.values().iter().enumerate().all(|(p, v)| {
                (0..3).all(|c| {
                    let (lo, hi) = self.bounds_at(n, p, c);
                    v[c] >= lo - tol && v[c] <= hi + tol
                })
            })
        })
    }
}

#[inline]
fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    hi.min(lo.max(x))
}

/// Pointwise `min(u_max, max(u_min, U))` on every component and step.
pub fn project_box(control: &ControlSchedule, bx: &BoxConstraints) -> ControlSchedule {
    control.map_points(|v, n, p| {
        let mut out = [0.0; 3];
        for c in 0..3 {
            let (lo, hi) = bx.bounds_at(n, p, c);
            out[c] = clip(v[c], lo, hi);
        }
        out
    })
}

/// `U - P(U - g)`, the pointwise stationarity defect.
pub fn vi_defect(control: &ControlSchedule, gradient: &ControlSchedule, bx: &BoxConstraints) -> ControlSchedule {
    control.zip_map(gradient, |u, g, n, p| {
        let mut out: Vec3 = [0.0; 3];
        for c in 0..3 {
            let (lo, hi) = bx.bounds_at(n, p, c);
            out[c] = u[c] - clip(u[c] - g[c], lo, hi);
        }
        out
    })
}

/// `||U - P(U - g)||` in the discrete `L2(0,T; L2)` norm.
pub fn vi_residual(control: &ControlSchedule, gradient: &ControlSchedule, bx: &BoxConstraints) -> f64 {
    vi_defect(control, gradient, bx).l2_norm()
}

/// `J` with left-endpoint quadrature in time: nodes `0..N-1` for the
/// tracking term, frames `0..N-1` for the control term.
pub fn evaluate_cost(traj: &Trajectory, control: &ControlSchedule, cost: &CostConfig) -> Result<f64> {
    cost.target.ensure_matches(traj)?;
    if traj.time_grid() != control.time_grid() {
        return Err(Error::InputMismatch("trajectory and control on different time grids".into()));
    }
    traj.grid().ensure_same(control.grid())?;
    let tg = traj.time_grid();
    let dt = tg.dt();
    let tracking: f64 = (0..tg.steps())
        .map(|n| dt * traj.state(n).sub(cost.target.frame(n)).gradient_norm_sq())
        .sum();
    Ok(0.5 * cost.kappa * tracking + 0.5 * cost.lambda * control.l2_norm_sq())
}

/// Everything an optimizer step needs at one control.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: ControlSchedule,
    pub state: Trajectory,
    pub adjoint: AdjointTrajectory,
}

/// Initial state, model, cost and solver settings of one control problem.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub u0: SpectralField,
    pub params: ModelParams,
    pub cost: CostConfig,
    pub solver: SolverConfig,
}

impl ControlProblem {
    pub fn new(u0: &SpectralField, params: ModelParams, cost: CostConfig) -> Result<Self> {
        params.validate()?;
        cost.validate()?;
        u0.grid().ensure_same(cost.target.grid())?;
        Ok(Self {
            u0: ingest_initial(u0),
            params,
            cost,
            solver: SolverConfig::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn time_grid(&self) -> &TimeGrid {
        self.cost.target.time_grid()
    }

    fn opts(&self) -> SensitivityOptions {
        SensitivityOptions::with_solver(self.solver)
    }

    fn ensure_control(&self, control: &ControlSchedule) -> Result<()> {
        if control.time_grid() != self.time_grid() {
            return Err(Error::InputMismatch("control and target on different time grids".into()));
        }
        control.grid().ensure_same(self.u0.grid())
    }

    pub fn state(&self, control: &ControlSchedule) -> Result<Trajectory> {
        self.ensure_control(control)?;
        solve_forward_with(&self.u0, control, &self.params, &self.solver)
    }

    pub fn cost_of(&self, control: &ControlSchedule) -> Result<f64> {
        evaluate_cost(&self.state(control)?, control, &self.cost)
    }

    pub fn evaluate(&self, control: &ControlSchedule) -> Result<Evaluation> {
        let state = self.state(control)?;
        let cost = evaluate_cost(&state, control, &self.cost)?;
        let adjoint = solve_adjoint_with(&state, &self.cost.target, &self.params, self.cost.kappa, &self.opts())?;
        let mut gradient = adjoint.to_control();
        gradient.axpy(self.cost.lambda, control);
        Ok(Evaluation {
            cost,
            gradient,
            state,
            adjoint,
        })
    }

    /// `H V = phi'[V] + lambda V` at a previously evaluated control.
    pub fn hessian_vector_at(&self, eval: &Evaluation, v: &ControlSchedule) -> Result<ControlSchedule> {
        self.ensure_control(v)?;
        let opts = self.opts();
        let w = solve_linearized_with(&eval.state, v, &self.params, &opts)?;
        let dphi = solve_second_adjoint_with(&eval.state, &eval.adjoint, &w, &self.params, self.cost.kappa, &opts)?;
        let mut hv = dphi.to_control();
        hv.axpy(self.cost.lambda, v);
        Ok(hv)
    }
}

/// `g_n = phi_n + lambda U_n` for every control frame.
pub fn reduced_gradient(
    control: &ControlSchedule,
    u0: &SpectralField,
    params: &ModelParams,
    cost: &CostConfig,
) -> Result<ControlSchedule> {
    let problem = ControlProblem::new(u0, *params, cost.clone())?;
    Ok(problem.evaluate(control)?.gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PeriodicGrid, PhysicalField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(8, 2.0 * PI).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 2).unwrap();
        let c = ControlSchedule::constant(tg, PhysicalField::constant(&g, [0.5, 2.0, -3.0]));
        let p = project_box(&c, &BoxConstraints::uniform(0.0, 1.0).unwrap());
        assert_eq!(p.frame(1).values()[7], [0.5, 1.0, 0.0]);
        let q = project_box(&c, &BoxConstraints::uniform(-1.0, 1.0).unwrap());
        assert_eq!(q.frame(0).values()[0], [0.5, 1.0, -1.0]);
        assert!(BoxConstraints::uniform(1.0, 0.0).is_err());
    }

    #[test]
    fn vi_residual_examples() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bx = BoxConstraints::uniform(-10.0, 10.0).unwrap();
        let u = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        let z = ControlSchedule::zeros(&g, tg);
        assert_eq!(vi_residual(&u, &z, &bx), 0.0);
        let grad = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        assert!((vi_residual(&u, &grad, &bx) - grad.l2_norm()).abs() < 1e-12 * grad.l2_norm());
        let pinned = ControlSchedule::constant(tg, PhysicalField::constant(&g, [10.0; 3]));
        let neg = grad.map_points(|v, _, _| [-v[0].abs() - 0.1, -v[1].abs() - 0.1, -v[2].abs() - 0.1]);
        assert_eq!(vi_residual(&pinned, &neg, &bx), 0.0);
    }

    #[test]
    fn cost_of_constant_control() {
        let g = grid();
        let tg = TimeGrid::new(0.5, 4).unwrap();
        let p = ModelParams::new(0.1, 0.1, 1.0, 1.0, 3.0, 0.5).unwrap();
        let c = ControlSchedule::constant(tg, PhysicalField::constant(&g, [1.0, 0.0, 0.0]));
        let cost = CostConfig::new(0.0, 2.0, TargetField::zeros(&g, tg)).unwrap();
        let prob = ControlProblem::new(&SpectralField::zeros(&g), p, cost).unwrap();
        let j = prob.cost_of(&c).unwrap();
        let vol = g.volume();
        assert!((j - 0.5 * 2.0 * 0.5 * vol).abs() < 1e-12 * j);
        assert!(CostConfig::new(0.0, 0.0, TargetField::zeros(&g, tg)).is_err());
    }

    #[test]
    fn gradient_is_lambda_u_when_on_target() {
        let g = grid();
        let tg = TimeGrid::new(0.2, 5).unwrap();
        let p = ModelParams::new(0.1, 0.1, 1.0, 1.0, 3.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u0 = SpectralField::random_divfree(&g, &mut rng, 1.0);
        let c = ControlSchedule::random(&g, tg, &mut rng, 1.0);
        let traj = crate::state::solve_forward(&u0, &c, &p).unwrap();
        let cost = CostConfig::new(1.0, 0.3, TargetField::from_trajectory(&traj)).unwrap();
        let grad = reduced_gradient(&c, &u0, &p, &cost).unwrap();
        assert!(grad.max_diff(&c.scaled(0.3)) < 1e-15);
    }
}
