//! Discrete adjoint: the duality identity between tangent and adjoint
//! sweeps, then a Taylor remainder table for the reduced gradient.
//!
//! cargo run --release --example adjoint_gradient
use nsvd::control::{ControlProblem, CostConfig};
use nsvd::sensitivity::duality_check;
use nsvd::state::solve_forward;
use nsvd::verification::checks::{random_data, Instance};
use nsvd::verification::fd_gradient_oracle;

fn main() -> nsvd::Result<()> {
    let inst = Instance {
        n: 16,
        length: 2.0 * std::f64::consts::PI,
        horizon: 0.5,
        steps: 50,
        params: nsvd::params::ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?,
    };
    for r in [1.0, 2.0, 3.0, 5.0] {
        let inst = inst.with_r(r);
        let d = random_data(&inst, 7)?;
        let traj = solve_forward(&d.u0, &d.control, &inst.params)?;
        let check = duality_check(&traj, &d.direction, &d.target, &inst.params, 1.0)?;
        println!("r = {r}: lhs {:+.12e}  rhs {:+.12e}  rel {:.2e}", check.lhs, check.rhs, check.rel_err);
    }

    let d = random_data(&inst, 11)?;
    let cost = CostConfig::new(1.0, 0.01, d.target)?;
    let problem = ControlProblem::new(&d.u0, inst.params, cost)?;
    let table = fd_gradient_oracle(&problem, &d.control, &d.direction, &[1e-1, 1e-2, 1e-3, 1e-4])?;
    println!("<g, V> = {:.12e}", table.directional);
    for row in &table.rows {
        println!("eps {:.0e}  remainder {:.3e}  central {:.12e}", row.eps, row.remainder, row.central);
    }
    println!("remainder order {:.3}", table.order().unwrap_or(f64::NAN));
    Ok(())
}
