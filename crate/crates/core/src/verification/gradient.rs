use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::params::ModelParams;
use crate::state::{solve_forward, ControlSchedule, TimeGrid, Trajectory};
use crate::fields::PeriodicGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheckRow {
    pub eps: f64,
    /// `|J(U + eps V) - J(U) - eps <g, V>|`
    pub remainder: f64,
    /// `(J(U + eps V) - J(U - eps V)) / (2 eps)`
    pub central: f64,
    /// `|central - <g, V>|`
    pub central_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheckTable {
    pub cost: f64,
    /// `<g, V>` from the adjoint gradient.
    pub directional: f64,
    pub rows: Vec<GradientCheckRow>,
}

impl GradientCheckTable {
    /// Least-squares slope of `log remainder` against `log eps`, over rows
    /// with a positive remainder. `None` when fewer than two such rows exist.
    pub fn order(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.remainder > 0.0)
            .map(|r| (r.eps.ln(), r.remainder.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// Order between consecutive rows.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[1].remainder / w[0].remainder).ln() / (w[1].eps / w[0].eps).ln())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,remainder,central,central_error,directional\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.eps, r.remainder, r.central, r.central_error, self.directional
            ));
        }
        s
    }
}

/// Taylor remainder and central-difference table for the direction `v`.
/// Rejects step sizes too small to move `U` in double precision.
pub fn fd_gradient_oracle(
    problem: &ControlProblem,
    control: &ControlSchedule,
    v: &ControlSchedule,
    eps_list: &[f64],
) -> Result<GradientCheckTable> {
    control.ensure_compatible(v)?;
    let scale = control.max_abs().max(1.0);
    let vmax = v.max_abs();
    for &eps in eps_list {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("finite-difference step must be > 0, got {eps}")));
        }
        if vmax > 0.0 && eps * vmax < 1e3 * f64::EPSILON * scale {
            return Err(Error::invalid(format!(
                "finite-difference step {eps:e} is below roundoff for |U| = {scale:e}, |V| = {vmax:e}"
            )));
        }
    }
    let eval = problem.evaluate(control)?;
    let directional = eval.gradient.inner(v);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut plus = control.clone();
        plus.axpy(eps, v);
        let mut minus = control.clone();
        minus.axpy(-eps, v);
        let jp = problem.cost_of(&plus)?;
        let jm = problem.cost_of(&minus)?;
        let central = (jp - jm) / (2.0 * eps);
        rows.push(GradientCheckRow {
            eps,
            remainder: (jp - eval.cost - eps * directional).abs(),
            central,
            central_error: (central - directional).abs(),
        });
    }
    Ok(GradientCheckTable {
        cost: eval.cost,
        directional,
        rows,
    })
}

/// Discrete `H^1(0,T; V)` norm squared:
/// `sum_{n<=N} dt |grad w_n|^2 + sum_{n<N} dt |grad (w_{n+1} - w_n) / dt|^2`.
pub fn h1v_norm_sq(w: &Trajectory) -> f64 {
    let dt = w.time_grid().dt();
    let states = w.states();
    let level: f64 = states.iter().map(|s| dt * s.gradient_norm_sq()).sum();
    let rate: f64 = states
        .windows(2)
        .map(|p| p[1].sub(&p[0]).gradient_norm_sq() / dt)
        .sum();
    level + rate
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzRow {
    pub pair: usize,
    /// Time-refinement factor relative to the base grid.
    pub refinement: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzTable {
    pub rows: Vec<LipschitzRow>,
    /// Pairs with `U1 = U2`, whose ratio is undefined.
    pub skipped: usize,
}

impl LipschitzTable {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// Largest relative change of a pair's ratio between successive refinements.
    pub fn max_refinement_drift(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.rows.windows(2) {
            if w[0].pair == w[1].pair {
                worst = worst.max((w[1].ratio - w[0].ratio).abs() / w[0].ratio.abs().max(f64::MIN_POSITIVE));
            }
        }
        worst
    }
}

/// `|S(U1) - S(U2)|_{H^1(0,T;V)} / |U1 - U2|_{L^2}` for a control pair,
/// evaluated on the time grid of the pair.
pub fn lipschitz_ratio(u0: &SpectralField, params: &ModelParams, a: &ControlSchedule, b: &ControlSchedule) -> Result<Option<f64>> {
    a.ensure_compatible(b)?;
    let du = a.sub(b).l2_norm();
    if du == 0.0 {
        return Ok(None);
    }
    let sa = solve_forward(u0, a, params)?;
    let sb = solve_forward(u0, b, params)?;
    Ok(Some(h1v_norm_sq(&sa.sub(&sb)).sqrt() / du))
}

/// Ratios for `n_pairs` random smooth control pairs of the given magnitude,
/// on the base time grid and on each refinement (frames repeated, so the
/// controls are the same functions of time).
pub fn lipschitz_probe(
    u0: &SpectralField,
    params: &ModelParams,
    time_grid: TimeGrid,
    n_pairs: usize,
    magnitude: f64,
    refinements: &[usize],
    seed: u64,
) -> Result<LipschitzTable> {
    let grid: &PeriodicGrid = u0.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut skipped = 0;
    for pair in 0..n_pairs {
        let a = ControlSchedule::random_smooth(grid, time_grid, &mut rng, magnitude);
        let b = ControlSchedule::random_smooth(grid, time_grid, &mut rng, magnitude);
        for &f in std::iter::once(&1).chain(refinements) {
            let (ra, rb) = (a.refined(f)?, b.refined(f)?);
            match lipschitz_ratio(u0, params, &ra, &rb)? {
                Some(ratio) => rows.push(LipschitzRow {
                    pair,
                    refinement: f,
                    ratio,
                }),
                None => {
                    skipped += 1;
                    break;
                }
            }
        }
    }
    Ok(LipschitzTable { rows, skipped })
}

/// Random pair generator shared by the suite and the examples.
pub fn random_direction(grid: &PeriodicGrid, tg: TimeGrid, seed: u64, amplitude: f64) -> ControlSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ControlSchedule::random_smooth(grid, tg, &mut rng, amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::CostConfig;
    use crate::sensitivity::TargetField;
    use std::f64::consts::PI;

    fn setup(kappa: f64) -> (ControlProblem, ControlSchedule, ControlSchedule) {
        let g = PeriodicGrid::new(8, 2.0 * PI).unwrap();
        let tg = TimeGrid::new(0.2, 8).unwrap();
        let p = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u0 = SpectralField::random_divfree(&g, &mut rng, 1.0);
        let ud = SpectralField::random_divfree(&g, &mut rng, 0.5);
        let cost = CostConfig::new(kappa, 0.1, TargetField::constant(tg, &ud)).unwrap();
        let prob = ControlProblem::new(&u0, p, cost).unwrap();
        let u = ControlSchedule::random_smooth(&g, tg, &mut rng, 0.5);
        let v = ControlSchedule::random_smooth(&g, tg, &mut rng, 1.0);
        (prob, u, v)
    }

    #[test]
    fn zero_direction_has_zero_remainders() {
        let (prob, u, v) = setup(1.0);
        let t = fd_gradient_oracle(&prob, &u, &v.scaled(0.0), &[1e-2, 1e-3]).unwrap();
        assert!(t.rows.iter().all(|r| r.remainder == 0.0 && r.central == 0.0));
        assert_eq!(t.order(), None);
    }

    #[test]
    fn quadratic_cost_is_exact() {
        let (prob, u, v) = setup(0.0);
        let t = fd_gradient_oracle(&prob, &u, &v, &[1e-1, 1e-2]).unwrap();
        for r in &t.rows {
            assert!(r.central_error <= 1e-12 * t.directional.abs().max(t.cost), "{r:?}");
        }
    }

    #[test]
    fn generic_order_is_two() {
        let (prob, u, v) = setup(1.0);
        let t = fd_gradient_oracle(&prob, &u, &v, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!(t.order().unwrap() >= 1.9, "{t:?}");
    }

    #[test]
    fn underflow_guard() {
        let (prob, u, v) = setup(1.0);
        assert!(fd_gradient_oracle(&prob, &u, &v, &[1e-20]).is_err());
        assert!(fd_gradient_oracle(&prob, &u, &v, &[0.0]).is_err());
    }

    #[test]
    fn identical_pair_is_skipped() {
        let (prob, u, _) = setup(1.0);
        assert_eq!(lipschitz_ratio(&prob.u0, &prob.params, &u, &u).unwrap(), None);
    }
}
