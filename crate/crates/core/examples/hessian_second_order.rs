//! Second-order adjoint: symmetry of Hessian-vector products and the
//! curvature of the reduced cost along critical directions.
//!
//! cargo run --release --example hessian_second_order
use nsvd::control::{optimize, second_order_check, BoxConstraints, ControlProblem, CostConfig, OptimizerConfig};
use nsvd::sensitivity::relative_gap;
use nsvd::verification::checks::{random_data, Instance};
use nsvd::verification::random_direction;

fn main() -> nsvd::Result<()> {
    let inst = Instance {
        n: 8,
        length: 2.0 * std::f64::consts::PI,
        horizon: 0.5,
        steps: 20,
        params: nsvd::params::ModelParams::new(0.1, 0.05, 0.5, 0.5, 3.0, 0.5)?,
    };
    for r in [2.0, 3.0, 5.0] {
        let inst = inst.with_r(r);
        let d = random_data(&inst, 21)?;
        let problem = ControlProblem::new(&d.u0, inst.params, CostConfig::new(1.0, 0.01, d.target)?)?;
        let eval = problem.evaluate(&d.control)?;
        let v2 = random_direction(problem.u0.grid(), *problem.time_grid(), 99, 1.0);
        let a = problem.hessian_vector_at(&eval, &d.direction)?.inner(&v2);
        let b = problem.hessian_vector_at(&eval, &v2)?.inner(&d.direction);
        println!("r = {r}: <H V1, V2> = {a:+.12e}  <H V2, V1> = {b:+.12e}  gap {:.1e}", relative_gap(a, b));

        // the critical cone is only meaningful at a stationary point
        let bx = BoxConstraints::uniform(-0.3, 0.3)?;
        let opt = OptimizerConfig {
            tol_vi: 1e-9,
            ..Default::default()
        };
        let res = optimize(&problem, &bx, &opt, None)?;
        let soc = second_order_check(&problem, &res.control, &bx, 3, 5)?;
        println!("       after {} iterations, sampled curvatures {:?}", res.report.iterations, soc.samples);
    }
    Ok(())
}
