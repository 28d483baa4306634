//! Refinement study of the spectral solver against the exact retained-mode
//! Galerkin system, integrated independently with RK4.
//!
//! cargo run --release --example galerkin_oracle
use nsvd::params::ModelParams;
use nsvd::state::TimeScheme;
use nsvd::verification::checks::galerkin_study;

fn main() -> nsvd::Result<()> {
    let params = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?;
    for scheme in [TimeScheme::ImexEuler, TimeScheme::Cnab] {
        let study = galerkin_study(&params, 0.5, &[10, 20, 40, 80, 160], scheme)?;
        println!("{scheme:?}");
        for (s, e) in study.steps.iter().zip(&study.errors) {
            println!("  steps {s:4}  error at T {e:.3e}");
        }
        println!("  observed order {:.3}", study.order());
    }
    Ok(())
}
