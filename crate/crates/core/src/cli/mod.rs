//! Run orchestration behind the `nsvd` binary: config ingestion, the four
//! subcommands, artifact layout and exit codes.
//!
//! Each run writes into one output directory. Next to its artifacts it
//! leaves `config.toml` (the resolved configuration) and `manifest.toml`,
//! which lists every artifact with its SHA-256.

pub mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{load_config, parse_config, RunConfig};

use crate::control::{
    bang_bang_classify, global_optimality_diagnostic, optimize, second_order_check, write_iteration_log,
    ControlProblem, CostConfig,
};
use crate::error::{Error, Result};
use crate::fields::snapshot::{save_snapshot, SnapshotKind};
use crate::state::{energy_balance_residual, solve_forward_with, write_energy_csv, write_trajectory_snapshots};
use crate::verification::{fd_gradient_oracle, random_direction, run_suite};
use config::streams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Optimize,
    Verify,
    GradientCheck,
}

/// Parsed command line.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

impl Invocation {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            config: None,
            output: None,
            seed: None,
            overrides: Vec::new(),
        }
    }
}

/// What a finished command produced. `exit` is 0 or 1; errors map to 2 and 3
/// through [`exit_code`].
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit: i32,
    pub dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub messages: Vec<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Integration { .. } | Error::LineSearch { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Runs the command, prints its messages and returns the process exit code.
pub fn run(inv: &Invocation) -> i32 {
    match execute(inv) {
        Ok(out) => {
            for m in &out.messages {
                println!("{m}");
            }
            out.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(inv: &Invocation) -> Result<Outcome> {
    let mut cfg = load_config(inv.config.as_deref(), &inv.overrides)?;
    if let Some(s) = inv.seed {
        cfg.seed = s;
    }
    if let Some(o) = &inv.output {
        cfg.output.dir = o.clone();
    }
    // relative file sources are resolved against the config file's directory
    let base = inv
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut run = Run::create(&cfg.output.dir)?;
    run.write("config.toml", cfg.to_text().as_bytes())?;
    let exit = match inv.command {
        Command::Simulate => cmd_simulate(&cfg, &base, &mut run)?,
        Command::Optimize => cmd_optimize(&cfg, &base, &mut run)?,
        Command::Verify => cmd_verify(&cfg, &mut run)?,
        Command::GradientCheck => cmd_gradient_check(&cfg, &base, &mut run)?,
    };
    run.finish(exit)
}

/// Output directory and the list of artifacts written so far.
struct Run {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
    messages: Vec<String>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest {
    artifact: Vec<ManifestEntry>,
}

impl Run {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            messages: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn track(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.artifacts.extend(paths);
    }

    fn say(&mut self, m: impl Into<String>) {
        self.messages.push(m.into());
    }

    fn finish(mut self, exit: i32) -> Result<Outcome> {
        let mut entries = Vec::with_capacity(self.artifacts.len());
        for p in &self.artifacts {
            let bytes = fs::read(p)?;
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            entries.push(ManifestEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let text = toml::to_string(&Manifest { artifact: entries }).expect("manifest is serializable");
        let mp = self.path("manifest.toml");
        fs::write(&mp, text)?;
        self.artifacts.push(mp);
        Ok(Outcome {
            exit,
            dir: self.dir,
            artifacts: self.artifacts,
            messages: self.messages,
        })
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    dt: f64,
    initial_energy: f64,
    final_energy: f64,
    max_scheme_residual: f64,
    max_continuous_residual: f64,
    energy_strictly_decreasing: bool,
    max_velocity: f64,
}

/// Forward solve: `energy.csv`, `snapshots/state_NNNNN.bin`, `summary.toml`.
fn cmd_simulate(cfg: &RunConfig, base: &Path, run: &mut Run) -> Result<i32> {
    let params = cfg.params()?;
    let u0 = cfg.initial_state(base)?;
    let control = cfg.control_schedule(base)?;
    let traj = solve_forward_with(&u0, &control, &params, &cfg.solver())?;
    let bal = energy_balance_residual(&traj, &control, &params)?;

    let p = run.path("energy.csv");
    write_energy_csv(csv_writer(&p)?, &bal)?;
    run.track([p]);
    let snaps = write_trajectory_snapshots(&run.path("snapshots"), &traj, cfg.output.snapshot_every)?;
    run.track(snaps);

    let e = bal.energies();
    let summary = SimulationSummary {
        steps: traj.time_grid().steps(),
        dt: traj.time_grid().dt(),
        initial_energy: e[0],
        final_energy: *e.last().expect("nonempty"),
        max_scheme_residual: bal.max_scheme_residual(),
        max_continuous_residual: bal.max_continuous_residual(),
        energy_strictly_decreasing: bal.strictly_decreasing(),
        max_velocity: traj.final_state().to_physical().max_norm(),
    };
    run.write("summary.toml", toml::to_string(&summary).expect("serializable").as_bytes())?;
    run.say(format!(
        "simulate: {} steps, energy {:e} -> {:e}, max scheme residual {:e}",
        summary.steps, summary.initial_energy, summary.final_energy, summary.max_scheme_residual
    ));
    Ok(EXIT_OK)
}

/// Builds the control problem described by the configuration.
pub fn build_problem(cfg: &RunConfig, base: &Path) -> Result<ControlProblem> {
    let params = cfg.params()?;
    let u0 = cfg.initial_state(base)?;
    let target = cfg.target(&u0, base)?;
    let cost = CostConfig::new(cfg.cost.kappa, cfg.cost.lambda, target)?;
    Ok(ControlProblem::new(&u0, params, cost)?.with_solver(cfg.solver()))
}

/// Optimization: `iterations.csv`, `control/control_NNNNN.bin`, `report.toml`,
/// and `bang_bang.csv` when `lambda = 0`. Non-convergence still exits 0.
fn cmd_optimize(cfg: &RunConfig, base: &Path, run: &mut Run) -> Result<i32> {
    let problem = build_problem(cfg, base)?;
    let bx = cfg.bounds.constraints()?;
    let initial = cfg.control_schedule(base)?;
    let res = optimize(&problem, &bx, &cfg.optimizer, Some(&initial))?;

    let p = run.path("iterations.csv");
    write_iteration_log(csv_writer(&p)?, &res.log)?;
    run.track([p]);

    let cdir = run.path("control");
    fs::create_dir_all(&cdir)?;
    let tg = *res.control.time_grid();
    for (n, f) in res.control.frames().iter().enumerate() {
        let p = cdir.join(format!("control_{n:05}.bin"));
        save_snapshot(&p, SnapshotKind::State, tg.time(n), f)?;
        run.track([p]);
    }

    let mut report = res.report.clone();
    let d = &cfg.diagnostics;
    if d.soc_samples > 0 && problem.params.r >= 2.0 {
        let soc = second_order_check(&problem, &res.control, &bx, d.soc_samples, cfg.seed + streams::SECOND_ORDER)?;
        report.soc_samples = soc.samples.clone();
        report.soc_status = Some(soc.status);
    }
    report.global = Some(global_optimality_diagnostic(
        &res.evaluation.adjoint,
        &problem.params,
        problem.cost.kappa,
        &d.global,
    ));
    run.write("report.toml", report.to_text().as_bytes())?;

    if problem.cost.lambda == 0.0 {
        let phi_max = res.evaluation.adjoint.to_control().max_abs();
        let map = bang_bang_classify(&res.evaluation.adjoint, d.bang_bang_threshold * phi_max);
        let tol = d.bound_tolerance * bx.width_scale();
        run.write("bang_bang.csv", map.to_csv(&res.control, &bx, tol).as_bytes())?;
        let c = map.counts(&res.control, &bx, tol);
        run.say(format!(
            "bang-bang: {} of {} determined samples at the indicated bound",
            c.consistent,
            c.determined()
        ));
    }
    run.say(format!(
        "optimize: {:?} after {} iterations, cost {:e}, vi residual {:e}",
        report.status, report.iterations, report.cost, report.vi_residual
    ));
    Ok(EXIT_OK)
}

/// Runs the property suite and writes `verify_report.toml`; exit 1 lists the
/// failing checks.
fn cmd_verify(cfg: &RunConfig, run: &mut Run) -> Result<i32> {
    let mut suite = cfg.verify;
    suite.seed = cfg.verify.seed.wrapping_add(cfg.seed);
    let rep = run_suite(&suite)?;
    run.write("verify_report.toml", rep.to_text().as_bytes())?;
    for c in &rep.checks {
        run.say(c.line());
    }
    if rep.all_pass() {
        run.say(format!("verify: all {} checks passed", rep.checks.len()));
        Ok(EXIT_OK)
    } else {
        let names: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
        run.say(format!("verify: {} failing checks: {}", names.len(), names.join(", ")));
        Ok(EXIT_VERIFICATION)
    }
}

/// Taylor remainder table at the configured control along a random
/// direction: `gradient_check.csv`.
fn cmd_gradient_check(cfg: &RunConfig, base: &Path, run: &mut Run) -> Result<i32> {
    let problem = build_problem(cfg, base)?;
    let control = cfg.control_schedule(base)?;
    let v = random_direction(
        problem.u0.grid(),
        *problem.time_grid(),
        cfg.seed + streams::DIRECTION,
        cfg.gradient_check.amplitude,
    );
    let table = fd_gradient_oracle(&problem, &control, &v, &cfg.gradient_check.eps)?;
    run.write("gradient_check.csv", table.to_csv().as_bytes())?;
    run.say(format!("gradient-check: <g, V> = {:e}", table.directional));
    for r in &table.rows {
        run.say(format!("  eps {:e}  remainder {:e}  central error {:e}", r.eps, r.remainder, r.central_error));
    }
    match table.order() {
        Some(o) => run.say(format!("gradient-check: observed remainder order {o:.4}")),
        None => run.say("gradient-check: all remainders vanish"),
    }
    Ok(EXIT_OK)
}
