//! Drives the command layer from a TOML document, as the binary does, and
//! lists the artifacts of the run.
//!
//! cargo run --release --example config_driven_run
use nsvd::cli::{execute, Command, Invocation};

const CONFIG: &str = r#"
seed = 5

[grid]
n = 8

[time]
horizon = 0.25
steps = 10

[initial]
kind = "taylor-green"

[cost]
kappa = 1.0
lambda = 0.01

[cost.target.field]
kind = "random-divfree"
amplitude = 0.5

[box]
u_min = -0.5
u_max = 0.5

[optimizer]
max_iters = 20
"#;

fn main() -> nsvd::Result<()> {
    let dir = std::env::temp_dir().join("nsvd-config-driven-run");
    let cfg = dir.join("run.toml");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(&cfg, CONFIG)?;
    let inv = Invocation {
        command: Command::Optimize,
        config: Some(cfg),
        output: Some(dir.join("out")),
        seed: None,
        overrides: vec!["diagnostics.soc_samples=2".into()],
    };
    let out = execute(&inv)?;
    for m in &out.messages {
        println!("{m}");
    }
    for a in &out.artifacts {
        println!("  {}", a.strip_prefix(&out.dir).unwrap_or(a).display());
    }
    Ok(())
}
