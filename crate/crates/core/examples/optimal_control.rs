//! Box-constrained tracking control. Runs projected gradient to a tight
//! tolerance, then reports the first-order and second-order diagnostics.
//!
//! cargo run --release --example optimal_control
use nsvd::control::{
    global_optimality_diagnostic, optimize, second_order_check, BoxConstraints, ControlProblem, CostConfig,
    GlobalConstants, OptimizerConfig,
};
use nsvd::fields::{PeriodicGrid, SpectralField};
use nsvd::params::ModelParams;
use nsvd::sensitivity::TargetField;
use nsvd::state::TimeGrid;
use rand::SeedableRng;

fn main() -> nsvd::Result<()> {
    let grid = PeriodicGrid::new(16, 2.0 * std::f64::consts::PI)?;
    let tg = TimeGrid::new(0.5, 50)?;
    let params = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let u0 = SpectralField::random_divfree(&grid, &mut rng, 1.0);
    let ud = SpectralField::random_divfree(&grid, &mut rng, 0.5);

    let cost = CostConfig::new(1.0, 0.01, TargetField::constant(tg, &ud))?;
    let problem = ControlProblem::new(&u0, params, cost)?;
    let bx = BoxConstraints::uniform(-0.5, 0.5)?;
    let opt = OptimizerConfig {
        tol_vi: 1e-10,
        ..Default::default()
    };
    let res = optimize(&problem, &bx, &opt, None)?;
    for rec in res.log.iter().step_by(5) {
        println!("{:3}  J = {:.10e}  vi = {:.3e}", rec.iter, rec.cost, rec.vi_residual);
    }
    println!("{}", res.report.to_text());

    let soc = second_order_check(&problem, &res.control, &bx, 4, 3)?;
    println!("critical-cone curvatures {:?} -> {:?}", soc.samples, soc.status);
    // the embedding constant is problem-specific; 1.0 is only a placeholder
    let consts = GlobalConstants {
        c: Some(1.0),
        c_r: Some(1.0),
        c_hat: Some(1.0),
    };
    let g = global_optimality_diagnostic(&res.evaluation.adjoint, &params, 1.0, &consts);
    println!("global condition with placeholder constants: {:?}", g.verdict);
    Ok(())
}
