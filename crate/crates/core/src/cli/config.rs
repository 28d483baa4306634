use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{BoxConstraints, GlobalConstants, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fields::snapshot::load_snapshot;
use crate::fields::{PeriodicGrid, PhysicalField, SpectralField, DEFAULT_DEALIAS_FRACTION};
use crate::params::ModelParams;
use crate::sensitivity::TargetField;
use crate::state::{ingest_initial, solve_forward_with, ControlSchedule, SolverConfig, TimeGrid, TimeScheme};
use crate::verification::SuiteConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
    pub dealias: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 16,
            length: 2.0 * std::f64::consts::PI,
            dealias: DEFAULT_DEALIAS_FRACTION,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
    /// Abort when `max |u|` exceeds this.
    pub blowup_bound: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            steps: 50,
            scheme: TimeScheme::ImexEuler,
            blowup_bound: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mu: 0.1,
            nu: 0.05,
            alpha: 0.5,
            beta: 0.5,
            r: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    TaylorGreen,
    RandomDivfree,
    /// A state snapshot file.
    File,
}

/// Source of a single velocity field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            kind: FieldKind::Zero,
            amplitude: 1.0,
            path: None,
        }
    }
}

/// `A (sin x cos y cos z, -cos x sin y cos z, 0)` scaled to the box.
pub fn taylor_green(grid: &PeriodicGrid, amplitude: f64) -> SpectralField {
    let k = std::f64::consts::TAU / grid.length();
    PhysicalField::from_fn(grid, |x| {
        let (a, b, c) = (k * x[0], k * x[1], k * x[2]);
        [
            amplitude * a.sin() * b.cos() * c.cos(),
            -amplitude * a.cos() * b.sin() * c.cos(),
            0.0,
        ]
    })
    .to_spectral()
}

impl FieldSpec {
    /// The field after ingestion: real, solenoidal, zero-mean, dealiased.
    pub fn build(&self, grid: &PeriodicGrid, seed: u64, base: &Path) -> Result<SpectralField> {
        if !self.amplitude.is_finite() {
            return Err(Error::Config(format!("amplitude must be finite, got {}", self.amplitude)));
        }
        let raw = match self.kind {
            FieldKind::Zero => SpectralField::zeros(grid),
            FieldKind::TaylorGreen => taylor_green(grid, self.amplitude),
            FieldKind::RandomDivfree => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                SpectralField::random_divfree(grid, &mut rng, self.amplitude)
            }
            FieldKind::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("field kind \"file\" needs a path".into()))?;
                load_snapshot(&base.join(path), Some(grid))?.field.to_spectral()
            }
        };
        Ok(ingest_initial(&raw))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    Zero,
    /// Spatially uniform `value`.
    Constant,
    /// Independent uniform samples in `[-amplitude, amplitude]`.
    Random,
    RandomSmooth,
    /// `amplitude (sin(x1)(1 + t), cos(x2), 0.5 sin(x0 + x1))` in box units.
    Sinusoid,
    /// Directory of `control_NNNNN.bin` frames.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    pub kind: ControlKind,
    pub amplitude: f64,
    pub value: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for ControlSpec {
    fn default() -> Self {
        Self {
            kind: ControlKind::Zero,
            amplitude: 1.0,
            value: [0.0; 3],
            path: None,
        }
    }
}

impl ControlSpec {
    pub fn build(&self, grid: &PeriodicGrid, tg: TimeGrid, seed: u64, base: &Path) -> Result<ControlSchedule> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.amplitude;
        let k = std::f64::consts::TAU / grid.length();
        let c = match self.kind {
            ControlKind::Zero => ControlSchedule::zeros(grid, tg),
            ControlKind::Constant => ControlSchedule::constant(tg, PhysicalField::constant(grid, self.value)),
            ControlKind::Random => ControlSchedule::random(grid, tg, &mut rng, a),
            ControlKind::RandomSmooth => ControlSchedule::random_smooth(grid, tg, &mut rng, a),
            ControlKind::Sinusoid => ControlSchedule::from_fn(grid, tg, |x, t| {
                [
                    a * (k * x[1]).sin() * (1.0 + t),
                    a * (k * x[2]).cos(),
                    0.5 * a * (k * (x[0] + x[1])).sin(),
                ]
            }),
            ControlKind::File => {
                let dir = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("control kind \"file\" needs a path".into()))?;
                let dir = base.join(dir);
                let frames = (0..tg.steps())
                    .map(|n| Ok(load_snapshot(&dir.join(format!("control_{n:05}.bin")), Some(grid))?.field))
                    .collect::<Result<Vec<_>>>()?;
                ControlSchedule::new(tg, frames)?
            }
        };
        if !c.is_finite() {
            return Err(Error::Config("control source produced non-finite values".into()));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// `u_d` constant in time, from `field`.
    Field,
    /// `u_d` is the forward solve driven by `control`, projected into the box.
    Forward,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub field: FieldSpec,
    pub control: ControlSpec,
}

impl Default for TargetKind {
    fn default() -> Self {
        TargetKind::Field
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub kappa: f64,
    pub lambda: f64,
    pub target: TargetSpec,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            lambda: 0.01,
            target: TargetSpec::default(),
        }
    }
}

/// Missing bounds mean unbounded on that side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

impl BoxSection {
    pub fn constraints(&self) -> Result<BoxConstraints> {
        BoxConstraints::uniform(
            self.u_min.unwrap_or(f64::NEG_INFINITY),
            self.u_max.unwrap_or(f64::INFINITY),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Random critical directions for the second-order check (needs `r >= 2`).
    pub soc_samples: usize,
    /// Bang-bang band half-width relative to `max |phi|`.
    pub bang_bang_threshold: f64,
    /// Tolerance for "at a bound", relative to the box width.
    pub bound_tolerance: f64,
    pub global: GlobalConstants,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            soc_samples: 4,
            bang_bang_threshold: 1e-3,
            bound_tolerance: 1e-6,
            global: GlobalConstants::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Snapshot every this many steps (the final step is always written).
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("nsvd-out"),
            snapshot_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientCheckSection {
    pub eps: Vec<f64>,
    /// RMS size of the random direction.
    pub amplitude: f64,
}

impl Default for GradientCheckSection {
    fn default() -> Self {
        Self {
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            amplitude: 1.0,
        }
    }
}

/// Full run description. Every section has defaults, so an empty document
/// is a valid desk-scale configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridSection,
    pub time: TimeSection,
    pub model: ModelSection,
    pub cost: CostSection,
    #[serde(rename = "box")]
    pub bounds: BoxSection,
    pub optimizer: OptimizerConfig,
    pub diagnostics: DiagnosticsSection,
    pub initial: FieldSpec,
    pub control: ControlSpec,
    pub output: OutputSection,
    pub verify: SuiteConfig,
    pub gradient_check: GradientCheckSection,
}

/// Seed offsets, so each random source draws an independent stream.
pub mod streams {
    pub const INITIAL: u64 = 0;
    pub const TARGET_FIELD: u64 = 1;
    pub const TARGET_CONTROL: u64 = 2;
    pub const CONTROL: u64 = 3;
    pub const SECOND_ORDER: u64 = 4;
    pub const DIRECTION: u64 = 5;
}

/// Parses `text` after applying `key.path=value` overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string
/// when it is not one.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {spec:?}: {p} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Re-runs every module-level validation.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.time_grid()?;
        self.params()?;
        self.bounds.constraints()?;
        self.optimizer.validate()?;
        if self.output.snapshot_every == 0 {
            return Err(Error::Config("output.snapshot_every must be positive".into()));
        }
        if self.cost.kappa < 0.0 || self.cost.lambda < 0.0 || self.cost.kappa + self.cost.lambda == 0.0 {
            return Err(Error::Config(format!(
                "cost weights need kappa >= 0, lambda >= 0, not both zero; got kappa = {}, lambda = {}",
                self.cost.kappa, self.cost.lambda
            )));
        }
        let d = &self.diagnostics;
        if !(d.bang_bang_threshold >= 0.0 && d.bound_tolerance >= 0.0) {
            return Err(Error::Config("diagnostics tolerances must be >= 0".into()));
        }
        if self.gradient_check.eps.is_empty() {
            return Err(Error::Config("gradient_check.eps must not be empty".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::with_dealias(self.grid.n, self.grid.length, self.grid.dealias)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.horizon, self.time.steps)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.mu, m.nu, m.alpha, m.beta, m.r, self.time.horizon)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            scheme: self.time.scheme,
            blowup_bound: self.time.blowup_bound,
            convection: true,
        }
    }

    pub fn initial_state(&self, base: &Path) -> Result<SpectralField> {
        self.initial.build(&self.grid()?, self.seed + streams::INITIAL, base)
    }

    pub fn control_schedule(&self, base: &Path) -> Result<ControlSchedule> {
        self.control.build(&self.grid()?, self.time_grid()?, self.seed + streams::CONTROL, base)
    }

    /// Builds `u_d`. A forward target projects its control into the box first,
    /// so it is reachable by an admissible control.
    pub fn target(&self, u0: &SpectralField, base: &Path) -> Result<TargetField> {
        let grid = self.grid()?;
        let tg = self.time_grid()?;
        let t = &self.cost.target;
        match t.kind {
            TargetKind::Field => {
                let f = t.field.build(&grid, self.seed + streams::TARGET_FIELD, base)?;
                Ok(TargetField::constant(tg, &f))
            }
            TargetKind::Forward => {
                let c = t.control.build(&grid, tg, self.seed + streams::TARGET_CONTROL, base)?;
                let c = crate::control::project_box(&c, &self.bounds.constraints()?);
                let traj = solve_forward_with(u0, &c, &self.params()?, &self.solver())?;
                Ok(TargetField::from_trajectory(&traj))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_valid() {
        let c = parse_config("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let again = parse_config(&c.to_text(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[grid]\nsize = 8\n", &[]).is_err());
        assert!(parse_config("colour = 1\n", &[]).is_err());
        assert!(parse_config("[optimizer]\nmaxiter = 3\n", &[]).is_err());
    }

    #[test]
    fn overrides_apply_with_types() {
        let c = parse_config(
            "[model]\nr = 2.0\n",
            &[
                "model.r=5".into(),
                "time.scheme=cnab".into(),
                "box.u_max=0.5".into(),
                "cost.target.kind=forward".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.model.r, 5.0);
        assert_eq!(c.time.scheme, TimeScheme::Cnab);
        assert_eq!(c.bounds.u_max, Some(0.5));
        assert_eq!(c.cost.target.kind, TargetKind::Forward);
        assert!(parse_config("", &["model.r".into()]).is_err());
        assert!(parse_config("", &["model.r.x=1".into()]).is_err());
    }

    #[test]
    fn invalid_exponent_names_constraint() {
        let err = parse_config("[model]\nr = 0.5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("r >= 1"), "{err}");
    }

    #[test]
    fn sources_are_solenoidal() {
        let c = parse_config("", &[]).unwrap();
        let g = c.grid().unwrap();
        for kind in [FieldKind::Zero, FieldKind::TaylorGreen, FieldKind::RandomDivfree] {
            let f = FieldSpec {
                kind,
                ..Default::default()
            }
            .build(&g, 1, Path::new("."))
            .unwrap();
            assert!(f.divergence_residual() < 1e-13);
            assert_eq!(f.mean()[0].norm(), 0.0);
        }
    }
}
