//! The damping term f(u) = |u|^{r-1} u: finite-difference checks of its
//! first three derivatives and the strong monotonicity bound.
//!
//! cargo run --release --example damping_calculus
use nsvd::fields::PeriodicGrid;
use nsvd::operators::{monotonicity_constant, DampingExponent};
use nsvd::verification::checks::{damping_fd_errors, monotonicity_margin};

fn main() -> nsvd::Result<()> {
    let grid = PeriodicGrid::new(4, 1.0)?;
    for r in [1.0, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 9.0] {
        let e = DampingExponent::new(r)?;
        let fd = damping_fd_errors(e, 1000, 1e-5, 1)?;
        let m = monotonicity_margin(&grid, e, 200, 1);
        println!(
            "r = {r:3}: f' {:.1e}  f'' {}  f''' {}  C(r) = {:.4}  min margin {:.3}",
            fd.d1,
            fd.d2.map_or("-".into(), |v| format!("{v:.1e}")),
            fd.d3.map_or("-".into(), |v| format!("{v:.1e}")),
            monotonicity_constant(e),
            m
        );
    }
    Ok(())
}
