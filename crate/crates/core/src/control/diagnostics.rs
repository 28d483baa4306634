use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clip, BoxConstraints, ControlProblem, CostConfig};
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::params::ModelParams;
use crate::sensitivity::AdjointTrajectory;
use crate::state::{ControlSchedule, TimeGrid};

/// Largest pointwise gap in the first-order characterization. For
/// `lambda > 0` this is `max |U - P(-phi / lambda)|`; for `lambda = 0` it is
/// the distance to the bound selected by the sign of `phi`, over components
/// where `|phi|` exceeds `1e-12 max |phi|`.
pub fn projection_residual(
    control: &ControlSchedule,
    phi: &ControlSchedule,
    lambda: f64,
    bx: &BoxConstraints,
) -> f64 {
    let cutoff = 1e-12 * phi.max_abs();
    let mut worst: f64 = 0.0;
    for (n, (uf, pf)) in control.frames().iter().zip(phi.frames()).enumerate() {
        for (p, (u, f)) in uf.values().iter().zip(pf.values()).enumerate() {
            for c in 0..3 {
                let (lo, hi) = bx.bounds_at(n, p, c);
                let gap = if lambda > 0.0 {
                    (u[c] - clip(-f[c] / lambda, lo, hi)).abs()
                } else if f[c].abs() > cutoff {
                    let b = if f[c] > 0.0 { lo } else { hi };
                    (u[c] - b).abs()
                } else {
                    0.0
                };
                worst = worst.max(gap);
            }
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BangBangLabel {
    /// `phi > threshold`: the control should sit at `u_min`.
    Min,
    /// `phi < -threshold`: the control should sit at `u_max`.
    Max,
    /// `|phi| <= threshold`.
    Undetermined,
}

/// Per frame, point and component labels.
#[derive(Clone, Debug)]
pub struct BangBangMap {
    pub time_grid: TimeGrid,
    pub labels: Vec<Vec<[BangBangLabel; 3]>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BangBangCounts {
    pub min: usize,
    pub max: usize,
    pub undetermined: usize,
    /// Determined samples where the control equals its labelled bound.
    pub consistent: usize,
}

impl BangBangCounts {
    pub fn determined(&self) -> usize {
        self.min + self.max
    }

    /// Share of determined samples that are consistent (1 if none are).
    pub fn consistent_fraction(&self) -> f64 {
        if self.determined() == 0 {
            1.0
        } else {
            self.consistent as f64 / self.determined() as f64
        }
    }
}

impl BangBangMap {
    /// Counts per frame, with consistency of `control` judged at tolerance
    /// `tol` against the labelled bounds.
    pub fn frame_counts(&self, control: &ControlSchedule, bx: &BoxConstraints, tol: f64) -> Vec<BangBangCounts> {
        self.labels
            .iter()
            .enumerate()
            .map(|(n, frame)| {
                let mut c = BangBangCounts::default();
                for (p, labs) in frame.iter().enumerate() {
                    let u = control.frame(n).values()[p];
                    for k in 0..3 {
                        let (lo, hi) = bx.bounds_at(n, p, k);
                        let target = match labs[k] {
                            BangBangLabel::Min => {
                                c.min += 1;
                                lo
                            }
                            BangBangLabel::Max => {
                                c.max += 1;
                                hi
                            }
                            BangBangLabel::Undetermined => {
                                c.undetermined += 1;
                                continue;
                            }
                        };
                        if (u[k] - target).abs() <= tol {
                            c.consistent += 1;
                        }
                    }
                }
                c
            })
            .collect()
    }

    pub fn counts(&self, control: &ControlSchedule, bx: &BoxConstraints, tol: f64) -> BangBangCounts {
        self.frame_counts(control, bx, tol)
            .into_iter()
            .fold(BangBangCounts::default(), |a, b| BangBangCounts {
                min: a.min + b.min,
                max: a.max + b.max,
                undetermined: a.undetermined + b.undetermined,
                consistent: a.consistent + b.consistent,
            })
    }

    /// CSV `frame,time,min,max,undetermined,consistent`.
    pub fn to_csv(&self, control: &ControlSchedule, bx: &BoxConstraints, tol: f64) -> String {
        let mut s = String::from("frame,time,min,max,undetermined,consistent\n");
        for (n, c) in self.frame_counts(control, bx, tol).iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                n,
                self.time_grid.time(n),
                c.min,
                c.max,
                c.undetermined,
                c.consistent
            ));
        }
        s
    }
}

/// Labels each control sample by the sign of the costate.
pub fn bang_bang_classify(adjoint: &AdjointTrajectory, threshold: f64) -> BangBangMap {
    let phi = adjoint.to_control();
    let labels = phi
        .frames()
        .iter()
        .map(|f| {
            f.values()
                .iter()
                .map(|v| {
                    let mut l = [BangBangLabel::Undetermined; 3];
                    for c in 0..3 {
                        if v[c] > threshold {
                            l[c] = BangBangLabel::Min;
                        } else if v[c] < -threshold {
                            l[c] = BangBangLabel::Max;
                        }
                    }
                    l
                })
                .collect()
        })
        .collect();
    BangBangMap {
        time_grid: *adjoint.time_grid(),
        labels,
    }
}

/// `(H V, <H V, V>)` at `control`; requires `r >= 2`.
pub fn hessian_vector(
    control: &ControlSchedule,
    v: &ControlSchedule,
    u0: &SpectralField,
    params: &ModelParams,
    cost: &CostConfig,
) -> Result<(ControlSchedule, f64)> {
    if params.r < 2.0 {
        return Err(Error::invalid(format!("Hessian requires r >= 2, got {}", params.r)));
    }
    let problem = ControlProblem::new(u0, *params, cost.clone())?;
    let eval = problem.evaluate(control)?;
    let hv = problem.hessian_vector_at(&eval, v)?;
    let curv = hv.inner(v);
    Ok((hv, curv))
}

/// Componentwise projection onto the critical cone: zero where
/// `|g| > tol`, non-negative where `U` is within `tol` of `u_min`,
/// non-positive where it is within `tol` of `u_max`.
pub fn critical_cone_project(
    v: &ControlSchedule,
    control: &ControlSchedule,
    gradient: &ControlSchedule,
    bx: &BoxConstraints,
    tol: f64,
) -> ControlSchedule {
    let act = control.zip_map(gradient, |u, g, n, p| {
        let mut out = [0.0; 3];
        for c in 0..3 {
            let (lo, hi) = bx.bounds_at(n, p, c);
            let code = if g[c].abs() > tol {
                0.0
            } else if (u[c] - lo).abs() <= tol {
                1.0
            } else if (u[c] - hi).abs() <= tol {
                -1.0
            } else {
                2.0
            };
            out[c] = code;
        }
        out
    });
    v.zip_map(&act, |x, a, _, _| {
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = match a[c] {
                0.0 => 0.0,
                1.0 => x[c].max(0.0),
                -1.0 => x[c].min(0.0),
                _ => x[c],
            };
        }
        out
    })
}

pub fn in_critical_cone(
    v: &ControlSchedule,
    control: &ControlSchedule,
    gradient: &ControlSchedule,
    bx: &BoxConstraints,
    tol: f64,
) -> bool {
    control.frames().iter().enumerate().all(|(n, uf)| {
        uf.values().iter().enumerate().all(|(p, u)| {
            let g = gradient.frame(n).values()[p];
            let x = v.frame(n).values()[p];
            (0..3).all(|c| {
                let (lo, hi) = bx.bounds_at(n, p, c);
                if g[c].abs() > tol {
                    x[c] == 0.0
                } else if (u[c] - lo).abs() <= tol {
                    x[c] >= 0.0
                } else if (u[c] - hi).abs() <= tol {
                    x[c] <= 0.0
                } else {
                    true
                }
            })
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SecondOrderStatus {
    Pass,
    Fail,
    /// Every sampled direction projected to zero.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderReport {
    /// `(direction id, <H V, V> / ||V||^2)` for each non-degenerate sample.
    pub samples: Vec<(usize, f64)>,
    pub skipped: usize,
    pub status: SecondOrderStatus,
}

impl SecondOrderReport {
    pub fn min_curvature(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.1).reduce(f64::min)
    }
}

/// Samples `n_samples` random directions, projects them onto the critical
/// cone at `control` with tolerance `1e-6 (u_max - u_min)` and evaluates the
/// normalized curvature of the reduced Hessian along each.
pub fn second_order_check(
    problem: &ControlProblem,
    control: &ControlSchedule,
    bx: &BoxConstraints,
    n_samples: usize,
    seed: u64,
) -> Result<SecondOrderReport> {
    if problem.params.r < 2.0 {
        return Err(Error::invalid(format!("Hessian requires r >= 2, got {}", problem.params.r)));
    }
    let eval = problem.evaluate(control)?;
    let tol = 1e-6 * bx.width_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut skipped = 0;
    for id in 0..n_samples {
        let raw = ControlSchedule::random(control.grid(), *control.time_grid(), &mut rng, 1.0);
        let v = critical_cone_project(&raw, control, &eval.gradient, bx, tol);
        let vv = v.l2_norm_sq();
        if vv <= 1e-24 * raw.l2_norm_sq() {
            skipped += 1;
            continue;
        }
        let hv = problem.hessian_vector_at(&eval, &v)?;
        samples.push((id, hv.inner(&v) / vv));
    }
    let status = if samples.is_empty() {
        SecondOrderStatus::Degenerate
    } else if samples.iter().all(|s| s.1 > 0.0) {
        SecondOrderStatus::Pass
    } else {
        SecondOrderStatus::Fail
    };
    Ok(SecondOrderReport {
        samples,
        skipped,
        status,
    })
}

/// Embedding constants of the global optimality condition. They are not
/// computable from the model and must be supplied by the user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConstants {
    /// `||v||_{L4} <= sqrt(C) ||v||_V`
    pub c: Option<f64>,
    /// Depends only on `r`.
    pub c_r: Option<f64>,
    pub c_hat: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GlobalVerdict {
    Satisfied,
    NotSatisfied,
    /// Constants missing, or `1 < r < 2` where no condition is available.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalDiagnostic {
    /// `max_n ||phi_n||_V`
    pub q_v: f64,
    /// `max_n ||phi_n||_H`
    pub q_h: f64,
    pub half_kappa: f64,
    /// Right-hand side of the condition, when computable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub verdict: GlobalVerdict,
    /// Strict inequality, which also gives uniqueness.
    pub strict: bool,
}

/// Checks `kappa/2 >= C (Q_V + 2 beta C_r C_hat^{r-2} Q_H)` for `r > 2`,
/// `C (Q_V + 4 beta Q_H)` for `r = 2` and `C Q_V` for `r = 1`.
pub fn global_optimality_diagnostic(
    adjoint: &AdjointTrajectory,
    params: &ModelParams,
    kappa: f64,
    constants: &GlobalConstants,
) -> GlobalDiagnostic {
    let q_v = adjoint.max_v_norm();
    let q_h = adjoint.max_h_norm();
    let half_kappa = 0.5 * kappa;
    let (r, beta) = (params.r, params.beta);
    let bound = if q_v == 0.0 && q_h == 0.0 {
        Some(0.0)
    } else if r == 1.0 {
        constants.c.map(|c| c * q_v)
    } else if r == 2.0 {
        constants.c.map(|c| c * (q_v + 4.0 * beta * q_h))
    } else if r > 2.0 {
        if beta == 0.0 {
            constants.c.map(|c| c * q_v)
        } else {
            match (constants.c, constants.c_r, constants.c_hat) {
                (Some(c), Some(cr), Some(ch)) => Some(c * (q_v + 2.0 * beta * cr * ch.powf(r - 2.0) * q_h)),
                _ => None,
            }
        }
    } else {
        None
    };
    let (verdict, strict) = match bound {
        Some(b) if half_kappa >= b => (GlobalVerdict::Satisfied, half_kappa > b),
        Some(_) => (GlobalVerdict::NotSatisfied, false),
        None => (GlobalVerdict::Unknown, false),
    };
    GlobalDiagnostic {
        q_v,
        q_h,
        half_kappa,
        bound,
        verdict,
        strict,
    }
}
