//! The full property suite, as run by `nsvd verify`.
//!
//! cargo run --release --example verification_suite
use nsvd::verification::{run_suite, SuiteConfig};

fn main() -> nsvd::Result<()> {
    let report = run_suite(&SuiteConfig::default())?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    println!("all pass: {}", report.all_pass());
    Ok(())
}
