//! Without control cost the optimal control sits on the bounds wherever the
//! costate is away from zero. Classifies the samples by the sign of the
//! costate and counts how many the optimizer put on the indicated bound.
//!
//! cargo run --release --example bang_bang_control
use nsvd::control::{bang_bang_classify, optimize, BoxConstraints, ControlProblem, CostConfig, OptimizerConfig};
use nsvd::fields::{PeriodicGrid, SpectralField};
use nsvd::params::ModelParams;
use nsvd::sensitivity::TargetField;
use nsvd::state::TimeGrid;
use rand::SeedableRng;

fn main() -> nsvd::Result<()> {
    let grid = PeriodicGrid::new(8, 2.0 * std::f64::consts::PI)?;
    let tg = TimeGrid::new(0.5, 25)?;
    let params = ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let u0 = SpectralField::random_divfree(&grid, &mut rng, 1.0);
    let ud = SpectralField::random_divfree(&grid, &mut rng, 0.5);
    let cost = CostConfig::new(1.0, 0.0, TargetField::constant(tg, &ud))?;
    let problem = ControlProblem::new(&u0, params, cost)?;
    let bx = BoxConstraints::uniform(-0.5, 0.5)?;

    let res = optimize(&problem, &bx, &OptimizerConfig::default(), None)?;
    println!("status {:?}, J = {:.6e}", res.report.status, res.report.cost);
    let phi_max = res.evaluation.adjoint.to_control().max_abs();
    let map = bang_bang_classify(&res.evaluation.adjoint, 1e-3 * phi_max);
    let counts = map.counts(&res.control, &bx, 1e-6 * bx.width_scale());
    println!(
        "min {}  max {}  undetermined {}  consistent fraction {:.4}",
        counts.min,
        counts.max,
        counts.undetermined,
        counts.consistent_fraction()
    );
    Ok(())
}
