//! Inverse crime: the target is the state driven by a known admissible
//! control, and the optimizer starts from zero.
//!
//! cargo run --release --example inverse_recovery
use nsvd::control::{optimize, project_box, BoxConstraints, ControlProblem, CostConfig, OptimizerConfig};
use nsvd::fields::{PeriodicGrid, SpectralField};
use nsvd::params::ModelParams;
use nsvd::sensitivity::TargetField;
use nsvd::state::{solve_forward, ControlSchedule, TimeGrid};
use rand::SeedableRng;

fn main() -> nsvd::Result<()> {
    let grid = PeriodicGrid::new(8, 2.0 * std::f64::consts::PI)?;
    let tg = TimeGrid::new(0.5, 25)?;
    let params = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let u0 = SpectralField::random_divfree(&grid, &mut rng, 1.0);
    let bx = BoxConstraints::uniform(-1.0, 1.0)?;
    let known = project_box(
        &ControlSchedule::from_fn(&grid, tg, |x, t| {
            [x[1].sin() * (1.0 + t), x[2].cos(), 0.5 * (x[0] + x[1]).sin()]
        }),
        &bx,
    );
    let target = TargetField::from_trajectory(&solve_forward(&u0, &known, &params)?);
    let problem = ControlProblem::new(&u0, params, CostConfig::new(1.0, 1e-4, target)?)?;

    let opt = OptimizerConfig {
        max_iters: 100,
        ..Default::default()
    };
    let res = optimize(&problem, &bx, &opt, None)?;
    let j0 = res.log[0].cost;
    println!("J(0) = {:.6e}  J(U*) = {:.6e}  reduction {:.2}%", j0, res.report.cost, 100.0 * (1.0 - res.report.cost / j0));
    // the control is identifiable only through its solenoidal part
    let err = res.control.sub(&known).l2_norm() / known.l2_norm();
    println!("relative distance to the generating control {err:.3}");
    Ok(())
}
