//! Individual property checks. Each returns the measured quantity; the
//! suite attaches thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::galerkin::{galerkin_reference_solve, GalerkinSystem};
use super::gradient::fd_gradient_oracle;
use crate::control::{ControlProblem, CostConfig};
use crate::error::Result;
use crate::fields::{PeriodicGrid, PhysicalField, SpectralField};
use crate::operators::{monotonicity_gap, trilinear, DampingExponent};
use crate::params::ModelParams;
use crate::sensitivity::{
    duality_check_with, relative_gap, solve_adjoint, solve_adjoint_checkpointed, SensitivityOptions, TargetField,
};
use crate::state::{
    energy_balance_residual, solve_forward, solve_forward_with, ControlSchedule, SolverConfig, TimeGrid, TimeScheme,
};
use crate::vec3::{norm, Vec3};
use num_complex::Complex64;

/// Desk-scale instance description shared by the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub length: f64,
    pub horizon: f64,
    pub steps: usize,
    pub params: ModelParams,
}

impl Instance {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n, self.length)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.params.r = r;
        self
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest relative defect among Leray idempotence and self-adjointness,
/// the curl identity, and the two skew-symmetry identities of `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorDefects {
    pub leray_idempotent: f64,
    pub leray_self_adjoint: f64,
    pub curl_identity: f64,
    pub skew_vanishing: f64,
    pub skew_antisymmetric: f64,
}

pub fn operator_identities(grid: &PeriodicGrid, trials: usize, seed: u64) -> Result<OperatorDefects> {
    let mut rng = rng(seed);
    let mut d = OperatorDefects {
        leray_idempotent: 0.0,
        leray_self_adjoint: 0.0,
        curl_identity: 0.0,
        skew_vanishing: 0.0,
        skew_antisymmetric: 0.0,
    };
    for _ in 0..trials {
        let a = PhysicalField::random(grid, &mut rng, 1.0).to_spectral();
        let b = PhysicalField::random(grid, &mut rng, 1.0).to_spectral();
        let pa = a.leray_project();
        let ppa = pa.leray_project();
        d.leray_idempotent = d.leray_idempotent.max(ppa.sub(&pa).l2_norm_sq().sqrt() / pa.l2_norm_sq().sqrt());
        let pb = b.leray_project();
        let (x, y) = (pa.inner(&b), a.inner(&pb));
        d.leray_self_adjoint = d
            .leray_self_adjoint
            .max((x - y).abs() / (a.l2_norm_sq() * b.l2_norm_sq()).sqrt());

        let u = SpectralField::random_divfree(grid, &mut rng, 1.0);
        let v = SpectralField::random_divfree(grid, &mut rng, 1.0);
        let w = SpectralField::random_divfree(grid, &mut rng, 1.0);
        let (c, g) = (u.curl().l2_norm_sq(), u.gradient_norm_sq());
        d.curl_identity = d.curl_identity.max((c.sqrt() - g.sqrt()).abs() / g.sqrt());

        let scale = u.l2_norm_sq().sqrt() * v.gradient_norm_sq().sqrt() * w.l2_norm_sq().sqrt();
        let bvv = trilinear(&u, &v, &v)?;
        let svv = u.l2_norm_sq().sqrt() * v.gradient_norm_sq().sqrt() * v.l2_norm_sq().sqrt();
        d.skew_vanishing = d.skew_vanishing.max(bvv.abs() / svv);
        let (bvw, bwv) = (trilinear(&u, &v, &w)?, trilinear(&u, &w, &v)?);
        d.skew_antisymmetric = d.skew_antisymmetric.max((bvw + bwv).abs() / scale);
    }
    Ok(d)
}

/// Central finite-difference errors of `f'`, `f''` and `f'''` (relative to
/// the analytic value) at random points with `|p|` in `[0.1, 2]`. Orders not
/// defined for `r` are reported as `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingFdErrors {
    pub d1: f64,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
}

fn random_unit_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let p = random_unit_ball(rng);
        let np = norm(p);
        if np > 1e-3 && np <= 1.0 {
            let s = rng.gen_range(0.1..2.0) / np;
            return [p[0] * s, p[1] * s, p[2] * s];
        }
    }
}

fn rel(fd: Vec3, exact: Vec3) -> f64 {
    let d = [fd[0] - exact[0], fd[1] - exact[1], fd[2] - exact[2]];
    norm(d) / norm(exact)
}

fn shifted(p: Vec3, h: f64, q: Vec3) -> Vec3 {
    [p[0] + h * q[0], p[1] + h * q[1], p[2] + h * q[2]]
}

fn central(h: f64, f: impl Fn(f64) -> Vec3) -> Vec3 {
    let (a, b) = (f(h), f(-h));
    [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h), (a[2] - b[2]) / (2.0 * h)]
}

pub fn damping_fd_errors(r: DampingExponent, points: usize, h: f64, seed: u64) -> Result<DampingFdErrors> {
    let mut rng = rng(seed);
    let rv = r.get();
    let mut e = DampingFdErrors {
        d1: 0.0,
        d2: (rv >= 2.0).then_some(0.0),
        d3: (rv >= 3.0).then_some(0.0),
    };
    for _ in 0..points {
        let p = random_point(&mut rng);
        let (q, g, k) = (random_unit_ball(&mut rng), random_unit_ball(&mut rng), random_unit_ball(&mut rng));
        let fd1 = central(h, |s| r.value(shifted(p, s, q)));
        e.d1 = e.d1.max(rel(fd1, r.d1(p, q)));
        if let Some(m) = e.d2.as_mut() {
            let fd2 = central(h, |s| r.d1(shifted(p, s, g), q));
            *m = m.max(rel(fd2, r.d2(p, q, g)?));
        }
        if let Some(m) = e.d3.as_mut() {
            let fd3 = central(h, |s| r.d2(shifted(p, s, k), q, g).expect("r >= 3"));
            *m = m.max(rel(fd3, r.d3(p, q, g, k)?));
        }
    }
    Ok(e)
}

/// Smallest `(lhs - rhs) / lhs` of the monotonicity bound over random pairs.
pub fn monotonicity_margin(grid: &PeriodicGrid, r: DampingExponent, pairs: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let (sa, sb) = (rng_amp(&mut rng), rng_amp(&mut rng));
        let a = PhysicalField::random(grid, &mut rng, sa);
        let b = PhysicalField::random(grid, &mut rng, sb);
        let (lhs, rhs) = monotonicity_gap(&a, &b, r);
        worst = worst.min((lhs - rhs) / lhs);
    }
    worst
}

fn rng_amp(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.gen_range(-1.0..1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyChecks {
    /// Largest relative defect of the discrete energy identity over all steps.
    pub scheme_residual: f64,
    /// Observed order of the continuous energy identity under dt halving.
    pub continuous_order: f64,
    /// Steps where the energy failed to decrease strictly with `U = 0`.
    pub monotone_violations: usize,
}

pub fn energy_checks(inst: &Instance, seed: u64) -> Result<EnergyChecks> {
    let g = inst.grid()?;
    let tg = inst.time_grid()?;
    let mut rng = rng(seed);
    let u0 = SpectralField::random_divfree(&g, &mut rng, 1.0);
    let control = ControlSchedule::random_smooth(&g, tg, &mut rng, 0.5);
    let p = &inst.params;
    let traj = solve_forward(&u0, &control, p)?;
    let bal = energy_balance_residual(&traj, &control, p)?;
    let fine = control.refined(2)?;
    let traj2 = solve_forward(&u0, &fine, p)?;
    let bal2 = energy_balance_residual(&traj2, &fine, p)?;
    let order = (bal.max_continuous_residual() / bal2.max_continuous_residual()).log2();

    let zero = ControlSchedule::zeros(&g, tg);
    let free = solve_forward(&u0, &zero, p)?;
    let e = energy_balance_residual(&free, &zero, p)?.energies();
    let violations = e.windows(2).filter(|w| !(w[1] < w[0])).count();
    Ok(EnergyChecks {
        scheme_residual: bal.max_scheme_residual(),
        continuous_order: order,
        monotone_violations: violations,
    })
}

/// Random `(U, V, u_d, u0)` problem data on the instance.
pub struct RandomData {
    pub u0: SpectralField,
    pub control: ControlSchedule,
    pub direction: ControlSchedule,
    pub target: TargetField,
}

pub fn random_data(inst: &Instance, seed: u64) -> Result<RandomData> {
    let g = inst.grid()?;
    let tg = inst.time_grid()?;
    let mut rng = rng(seed);
    let u0 = SpectralField::random_divfree(&g, &mut rng, 1.0);
    let control = ControlSchedule::random_smooth(&g, tg, &mut rng, 0.5);
    let direction = ControlSchedule::random_smooth(&g, tg, &mut rng, 1.0);
    let frames = (0..=tg.steps())
        .map(|_| SpectralField::random_divfree(&g, &mut rng, 0.5))
        .collect();
    Ok(RandomData {
        u0,
        control,
        direction,
        target: TargetField::new(tg, frames)?,
    })
}

/// Relative gap of the duality identity `kappa sum dt (grad w, grad(u - ud)) = sum dt (phi, V)`.
/// `flip_transport` deliberately corrupts the adjoint.
pub fn duality_defect(inst: &Instance, kappa: f64, seed: u64, flip_transport: bool) -> Result<f64> {
    let d = random_data(inst, seed)?;
    let traj = solve_forward(&d.u0, &d.control, &inst.params)?;
    let opts = SensitivityOptions {
        flip_transport,
        ..Default::default()
    };
    Ok(duality_check_with(&traj, &d.direction, &d.target, &inst.params, kappa, &opts)?.rel_err)
}

/// Least-squares Taylor remainder order over `eps_list`.
pub fn taylor_order(inst: &Instance, kappa: f64, lambda: f64, eps_list: &[f64], seed: u64) -> Result<f64> {
    let d = random_data(inst, seed)?;
    let cost = CostConfig::new(kappa, lambda, d.target)?;
    let prob = ControlProblem::new(&d.u0, inst.params, cost)?;
    let t = fd_gradient_oracle(&prob, &d.control, &d.direction, eps_list)?;
    Ok(t.order().unwrap_or(f64::NAN))
}

/// Relative gap `|<H V1, V2> - <H V2, V1>| / max`.
pub fn hessian_asymmetry(inst: &Instance, kappa: f64, lambda: f64, seed: u64) -> Result<f64> {
    let d = random_data(inst, seed)?;
    let cost = CostConfig::new(kappa, lambda, d.target)?;
    let prob = ControlProblem::new(&d.u0, inst.params, cost)?;
    let eval = prob.evaluate(&d.control)?;
    let v2 = super::gradient::random_direction(prob.u0.grid(), *prob.time_grid(), seed ^ 0x5eed, 1.0);
    let h1 = prob.hessian_vector_at(&eval, &d.direction)?;
    let h2 = prob.hessian_vector_at(&eval, &v2)?;
    Ok(relative_gap(h1.inner(&v2), h2.inner(&d.direction)))
}

/// Largest difference between full-storage and checkpointed adjoints.
pub fn checkpoint_defect(inst: &Instance, kappa: f64, stride: usize, seed: u64) -> Result<f64> {
    let d = random_data(inst, seed)?;
    let traj = solve_forward(&d.u0, &d.control, &inst.params)?;
    let full = solve_adjoint(&traj, &d.target, &inst.params, kappa)?;
    let ck = solve_adjoint_checkpointed(
        &d.u0,
        &d.control,
        &d.target,
        &inst.params,
        kappa,
        stride,
        &SensitivityOptions::default(),
    )?;
    Ok(full.max_diff(&ck))
}

/// Low-mode refinement study against the Galerkin oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleStudy {
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
}

impl OracleStudy {
    /// Least-squares slope of `log error` against `log dt`.
    pub fn order(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .steps
            .iter()
            .zip(&self.errors)
            .map(|(s, e)| (-(*s as f64).ln(), e.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

/// Two active mode pairs on an 8^3 grid whose dealiasing mask keeps
/// `|m_i| <= 1`; the nonlinearity spreads energy over the 26 retained modes.
pub fn two_mode_initial(grid: &PeriodicGrid) -> SpectralField {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    let mut u = SpectralField::zeros(grid);
    u.set_mode_pair([1, 0, 0], [z, c(0.6, 0.2), c(-0.3, 0.4)]);
    u.set_mode_pair([0, 1, -1], [c(0.5, -0.1), c(0.2, 0.3), c(0.2, 0.3)]);
    u
}

/// Solver error at `T` against the oracle for each step count. The control
/// is piecewise constant on the coarsest grid and refined by repetition.
pub fn galerkin_study(
    params: &ModelParams,
    horizon: f64,
    step_counts: &[usize],
    scheme: TimeScheme,
) -> Result<OracleStudy> {
    let g = PeriodicGrid::with_dealias(8, 2.0 * std::f64::consts::PI, 0.25)?;
    let u0 = two_mode_initial(&g);
    let base = *step_counts.iter().min().expect("nonempty step list");
    let tg = TimeGrid::new(horizon, base)?;
    let control = ControlSchedule::from_fn(&g, tg, |x, t| {
        [0.3 * x[1].sin() * (1.0 + t), 0.2 * (x[0] + x[2]).cos(), 0.1 * x[0].sin()]
    });
    let sys = GalerkinSystem::retained(&g, *params, true)?;
    let finest = *step_counts.iter().max().expect("nonempty step list");
    let oracle = galerkin_reference_solve(&sys, &u0, &control, horizon / finest as f64 / 100.0)?;
    let reference = oracle.final_state();
    let cfg = SolverConfig {
        scheme,
        ..Default::default()
    };
    let mut errors = Vec::with_capacity(step_counts.len());
    for &s in step_counts {
        if s % base != 0 {
            return Err(crate::Error::invalid(format!("step count {s} is not a multiple of {base}")));
        }
        let c = control.refined(s / base)?;
        let traj = solve_forward_with(&u0, &c, params, &cfg)?;
        errors.push(traj.final_state().sub(reference).l2_norm_sq().sqrt());
    }
    Ok(OracleStudy {
        steps: step_counts.to_vec(),
        errors,
    })
}
