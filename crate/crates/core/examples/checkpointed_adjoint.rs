//! Reverse sweep with stored checkpoints instead of the full trajectory.
//! The recomputed states are bitwise those of the forward solve.
//!
//! cargo run --release --example checkpointed_adjoint
use nsvd::sensitivity::{solve_adjoint, solve_adjoint_checkpointed, SensitivityOptions};
use nsvd::state::solve_forward;
use nsvd::verification::checks::{random_data, Instance};

fn main() -> nsvd::Result<()> {
    let inst = Instance {
        n: 16,
        length: 2.0 * std::f64::consts::PI,
        horizon: 0.5,
        steps: 50,
        params: nsvd::params::ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?,
    };
    let d = random_data(&inst, 3)?;
    let traj = solve_forward(&d.u0, &d.control, &inst.params)?;
    let full = solve_adjoint(&traj, &d.target, &inst.params, 1.0)?;
    for stride in [1, 5, 7, 25] {
        let ck = solve_adjoint_checkpointed(
            &d.u0,
            &d.control,
            &d.target,
            &inst.params,
            1.0,
            stride,
            &SensitivityOptions::default(),
        )?;
        println!("stride {stride:2}: max difference {:.1e}", full.max_diff(&ck));
    }
    Ok(())
}
