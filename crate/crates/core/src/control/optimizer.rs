use std::io::Write;

use serde::{Deserialize, Serialize};

use super::diagnostics::{projection_residual, GlobalDiagnostic, SecondOrderStatus};
use super::{project_box, vi_residual, BoxConstraints, ControlProblem, Evaluation};
use crate::error::{Error, Result};
use crate::state::ControlSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Trial step of the first iteration, and fallback trial step.
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub tol_vi: f64,
    /// Backtracking attempts before the line search gives up.
    pub max_shrinks: usize,
    /// Start each line search from the Barzilai-Borwein step
    /// `<dU, dU> / <dU, dg>` instead of `step0`.
    pub barzilai_borwein: bool,
    /// Decreases smaller than `cost_noise * |J|` are treated as roundoff: the
    /// sufficient-decrease test is relaxed by this amount.
    pub cost_noise: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            step0: 1.0,
            armijo_c: 1e-4,
            shrink: 0.5,
            tol_vi: 1e-8,
            max_shrinks: 40,
            barzilai_borwein: true,
            cost_noise: 1e-14,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0.is_finite() && self.step0 > 0.0) {
            return Err(Error::invalid(format!("step0 must be > 0, got {}", self.step0)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid(format!("armijo_c must lie in (0, 1), got {}", self.armijo_c)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.tol_vi >= 0.0) {
            return Err(Error::invalid(format!("tol_vi must be >= 0, got {}", self.tol_vi)));
        }
        if !(self.cost_noise >= 0.0 && self.cost_noise < 1e-6) {
            return Err(Error::invalid(format!("cost_noise must lie in [0, 1e-6), got {}", self.cost_noise)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Converged,
    NotConverged,
    LineSearchFailed,
}

/// One row of the iteration log. `step_size` and `line_search_evals`
/// describe the step taken from this iterate (zero on the final row).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub vi_residual: f64,
    pub step_size: f64,
    pub line_search_evals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalityReport {
    pub status: RunStatus,
    pub iterations: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub vi_residual: f64,
    /// Largest pointwise gap in the projection formula
    /// `U = P(-phi / lambda)`, or to the bang-bang bound when `lambda = 0`.
    pub projection_residual: f64,
    /// `(direction id, curvature)` of the sampled critical directions.
    #[serde(default)]
    pub soc_samples: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc_status: Option<SecondOrderStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<GlobalDiagnostic>,
}

impl OptimalityReport {
    /// Flat `key = value` text (TOML).
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report fields are serializable")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("malformed optimality report: {e}")))
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub control: ControlSchedule,
    pub evaluation: Evaluation,
    pub report: OptimalityReport,
    pub log: Vec<IterationRecord>,
}

fn record(iter: usize, eval: &Evaluation, vi: f64) -> IterationRecord {
    IterationRecord {
        iter,
        cost: eval.cost,
        grad_norm: eval.gradient.l2_norm(),
        vi_residual: vi,
        step_size: 0.0,
        line_search_evals: 0,
    }
}

/// Projected gradient `U <- P(U - s g)` with Armijo backtracking on
/// `J(U+) <= J(U) - c/s ||U+ - U||^2`. Starts from the projection of
/// `initial` (zero if absent).
pub fn optimize(
    problem: &ControlProblem,
    bx: &BoxConstraints,
    opt: &OptimizerConfig,
    initial: Option<&ControlSchedule>,
) -> Result<OptimizationResult> {
    opt.validate()?;
    let start = match initial {
        Some(c) => c.clone(),
        None => ControlSchedule::zeros(problem.u0.grid(), *problem.time_grid()),
    };
    bx.ensure_fits(&start)?;
    let mut u = project_box(&start, bx);
    let mut eval = problem.evaluate(&u)?;
    let mut log = Vec::new();
    let mut trial = opt.step0;
    let mut status = RunStatus::NotConverged;
    let mut iter = 0;

    loop {
        let vi = vi_residual(&u, &eval.gradient, bx);
        log.push(record(iter, &eval, vi));
        if vi <= opt.tol_vi {
            status = RunStatus::Converged;
            break;
        }
        if iter == opt.max_iters {
            break;
        }

        let mut s = trial;
        let mut accepted = None;
        let mut evals = 0;
        let slack = opt.cost_noise * eval.cost.abs();
        for _ in 0..=opt.max_shrinks {
            let mut cand = u.clone();
            cand.axpy(-s, &eval.gradient);
            let cand = project_box(&cand, bx);
            let dist = cand.sub(&u).l2_norm_sq();
            evals += 1;
            // a forward blow-up at an overly long trial step is just a rejection
            let j = match problem.cost_of(&cand) {
                Ok(j) => j,
                Err(Error::Integration { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            if j <= eval.cost - opt.armijo_c / s * dist + slack {
                accepted = Some(cand);
                break;
            }
            s *= opt.shrink;
        }
        let last = log.last_mut().expect("row pushed above");
        last.line_search_evals = evals;
        let Some(next) = accepted else {
            status = RunStatus::LineSearchFailed;
            break;
        };
        last.step_size = s;

        let next_eval = problem.evaluate(&next)?;
        trial = opt.step0;
        if opt.barzilai_borwein {
            let du = next.sub(&u);
            let dg = next_eval.gradient.sub(&eval.gradient);
            let (uu, ug) = (du.l2_norm_sq(), du.inner(&dg));
            if ug > 0.0 && uu > 0.0 {
                let bb = uu / ug;
                if bb.is_finite() {
                    trial = bb.clamp(1e-12, 1e12);
                }
            }
        }
        u = next;
        eval = next_eval;
        iter += 1;
    }

    let vi = log.last().map(|r| r.vi_residual).unwrap_or(f64::NAN);
    let report = OptimalityReport {
        status,
        iterations: iter,
        cost: eval.cost,
        grad_norm: eval.gradient.l2_norm(),
        vi_residual: vi,
        projection_residual: projection_residual(&u, &eval.adjoint.to_control(), problem.cost.lambda, bx),
        soc_samples: Vec::new(),
        soc_status: None,
        global: None,
    };
    Ok(OptimizationResult {
        control: u,
        evaluation: eval,
        report,
        log,
    })
}

/// CSV with header `iter,cost,grad_norm,vi_residual,step_size,line_search_evals`.
pub fn write_iteration_log<W: Write>(mut w: W, log: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(w, "iter,cost,grad_norm,vi_residual,step_size,line_search_evals")?;
    for r in log {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.iter, r.cost, r.grad_norm, r.vi_residual, r.step_size, r.line_search_evals
        )?;
    }
    w.flush()
}
