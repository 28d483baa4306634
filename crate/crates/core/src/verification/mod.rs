//! Independent oracles and the property suite behind `verify`.

pub mod checks;
mod galerkin;
mod gradient;

use serde::{Deserialize, Serialize};

pub use galerkin::{galerkin_reference_solve, GalerkinSystem};
pub use gradient::{
    fd_gradient_oracle, h1v_norm_sq, lipschitz_probe, lipschitz_ratio, random_direction, GradientCheckRow,
    GradientCheckTable, LipschitzRow, LipschitzTable,
};

use crate::error::{Error, Result};
use crate::operators::DampingExponent;
use crate::params::ModelParams;
use crate::state::TimeScheme;
use checks::Instance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    /// `"<="` or `">="`: how `measured` is compared with `threshold`.
    pub relation: String,
    pub seed: u64,
    pub pass: bool,
}

impl CheckResult {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            relation: "<=".into(),
            seed,
            pass: measured <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            relation: ">=".into(),
            seed,
            pass: measured >= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:e} {} {:e} (seed {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.relation,
            self.threshold,
            self.seed
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(rename = "check")]
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One `[[check]]` table per check.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report fields are serializable")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("malformed verification report: {e}")))
    }
}

/// Sizes and seed of the `verify` suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub n: usize,
    pub length: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Random instances per sampled check.
    pub instances: usize,
    /// Random points per damping exponent.
    pub damping_points: usize,
    pub seed: u64,
    /// Sign-flip the adjoint transport term. Only for exercising the suite.
    pub corrupt_adjoint: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n: 16,
            length: 2.0 * std::f64::consts::PI,
            horizon: 0.5,
            steps: 20,
            instances: 4,
            damping_points: 1000,
            seed: 2024,
            corrupt_adjoint: false,
        }
    }
}

const DAMPING_EXPONENTS: [f64; 8] = [1.0, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 9.0];

fn base_params(horizon: f64) -> Result<ModelParams> {
    ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, horizon)
}

/// Runs every property check and collects the results; never stops early on
/// a failing check.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rep = VerificationReport::default();
    let seed = cfg.seed;
    let inst = Instance {
        n: cfg.n,
        length: cfg.length,
        horizon: cfg.horizon,
        steps: cfg.steps,
        params: base_params(cfg.horizon)?,
    };
    let grid = inst.grid()?;

    let ops = checks::operator_identities(&grid, cfg.instances, seed)?;
    rep.push(CheckResult::at_most("leray_idempotent", ops.leray_idempotent, 1e-12, seed));
    rep.push(CheckResult::at_most("leray_self_adjoint", ops.leray_self_adjoint, 1e-12, seed));
    rep.push(CheckResult::at_most("curl_identity", ops.curl_identity, 1e-12, seed));
    rep.push(CheckResult::at_most("trilinear_vanishing", ops.skew_vanishing, 1e-12, seed));
    rep.push(CheckResult::at_most("trilinear_antisymmetric", ops.skew_antisymmetric, 1e-12, seed));

    let small = crate::fields::PeriodicGrid::new(4, cfg.length)?;
    for (i, r) in DAMPING_EXPONENTS.iter().enumerate() {
        let s = seed + i as u64;
        let e = DampingExponent::new(*r)?;
        let fd = checks::damping_fd_errors(e, cfg.damping_points, 1e-5, s)?;
        rep.push(CheckResult::at_most(format!("damping_d1_fd_r{r}"), fd.d1, 1e-6, s));
        if let Some(d2) = fd.d2 {
            rep.push(CheckResult::at_most(format!("damping_d2_fd_r{r}"), d2, 1e-6, s));
        }
        if let Some(d3) = fd.d3 {
            rep.push(CheckResult::at_most(format!("damping_d3_fd_r{r}"), d3, 1e-5, s));
        }
        let m = checks::monotonicity_margin(&small, e, cfg.damping_points, s);
        // r = 1 is the equality case, so allow roundoff
        rep.push(CheckResult::at_least(format!("monotonicity_r{r}"), m, -1e-12, s));
    }

    let en = checks::energy_checks(&inst, seed)?;
    rep.push(CheckResult::at_most("energy_scheme_residual", en.scheme_residual, 1e-10, seed));
    rep.push(CheckResult::at_least("energy_continuous_order", en.continuous_order, 0.9, seed));
    rep.push(CheckResult::at_most(
        "energy_monotone_violations",
        en.monotone_violations as f64,
        0.0,
        seed,
    ));

    let rs = [1.0, 2.0, 3.0, 5.0];
    let mut worst = (0.0, seed);
    for k in 0..cfg.instances {
        let s = seed + 100 + k as u64;
        let d = checks::duality_defect(&inst.with_r(rs[k % rs.len()]), 1.0, s, cfg.corrupt_adjoint)?;
        if !(d <= worst.0) {
            worst = (d, s);
        }
    }
    rep.push(CheckResult::at_most("adjoint_duality", worst.0, 1e-10, worst.1));

    let mut worst = (f64::INFINITY, seed);
    for k in 0..cfg.instances {
        let s = seed + 200 + k as u64;
        let o = checks::taylor_order(&inst, 1.0, 0.01, &[1e-1, 1e-2, 1e-3, 1e-4], s)?;
        if !(o >= worst.0) {
            worst = (o, s);
        }
    }
    rep.push(CheckResult::at_least("gradient_taylor_order", worst.0, 1.9, worst.1));

    let mut worst = (0.0, seed);
    for (k, r) in [2.0, 3.0, 5.0].iter().enumerate() {
        let s = seed + 300 + k as u64;
        let a = checks::hessian_asymmetry(&inst.with_r(*r), 1.0, 0.01, s)?;
        if !(a <= worst.0) {
            worst = (a, s);
        }
    }
    rep.push(CheckResult::at_most("hessian_symmetry", worst.0, 1e-8, worst.1));

    let ck = checks::checkpoint_defect(&inst, 1.0, 3, seed + 400)?;
    rep.push(CheckResult::at_most("checkpoint_equivalence", ck, 0.0, seed + 400));

    let gp = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?;
    let euler = checks::galerkin_study(&gp, 0.5, &[10, 20, 40, 80], TimeScheme::ImexEuler)?;
    rep.push(CheckResult::at_least("galerkin_order_imex_euler", euler.order(), 0.9, 0));
    let cnab = checks::galerkin_study(&gp, 0.5, &[10, 20, 40, 80], TimeScheme::Cnab)?;
    rep.push(CheckResult::at_least("galerkin_order_cnab", cnab.order(), 1.8, 0));

    let u0 = checks::random_data(&inst, seed + 500)?.u0;
    let lp = lipschitz_probe(&u0, &inst.params, inst.time_grid()?, 2, 0.5, &[2], seed + 500)?;
    rep.push(CheckResult::at_most(
        "lipschitz_refinement_drift",
        lp.max_refinement_drift(),
        0.1,
        seed + 500,
    ));
    Ok(rep)
}
