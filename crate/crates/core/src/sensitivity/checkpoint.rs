use super::{adjoint_step, stepper_for, AdjointTrajectory, SensitivityOptions, TargetField};
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::operators::StateSample;
use crate::params::ModelParams;
use crate::state::{ingest_initial, ControlSchedule};

/// Adjoint sweep that stores only every `stride`-th forward state and
/// recomputes each segment before sweeping back through it. Peak storage is
/// about `N / stride + stride` states; the result is bitwise identical to the
/// full-storage sweep.
pub fn solve_adjoint_checkpointed(
    u0: &SpectralField,
    control: &ControlSchedule,
    target: &TargetField,
    params: &ModelParams,
    kappa: f64,
    stride: usize,
    opts: &SensitivityOptions,
) -> Result<AdjointTrajectory> {
    if stride == 0 {
        return Err(Error::invalid("checkpoint stride must be positive"));
    }
    let tg = *control.time_grid();
    if tg != *target.time_grid() {
        return Err(Error::InputMismatch("target and control on different time grids".into()));
    }
    u0.grid().ensure_same(control.grid())?;
    u0.grid().ensure_same(target.grid())?;
    let st = stepper_for(u0.grid(), &tg, params, opts)?;
    let steps = tg.steps();

    let forward = |u: &SpectralField, n: usize| -> Result<SpectralField> {
        let sample = StateSample::new(u);
        st.check(n, &sample)?;
        Ok(st.euler_step(u, &sample, control.frame(n)))
    };

    let mut checkpoints = vec![ingest_initial(u0)];
    let mut u = checkpoints[0].clone();
    for n in 0..steps {
        u = forward(&u, n)?;
        if (n + 1) % stride == 0 && n + 1 < steps {
            checkpoints.push(u.clone());
        }
    }
    st.check_field(steps, &u)?;

    let mut costates = vec![SpectralField::zeros(u0.grid()); steps + 1];
    for (seg, start_state) in checkpoints.iter().enumerate().rev() {
        let start = seg * stride;
        let end = (start + stride).min(steps);
        let mut segment = Vec::with_capacity(end - start + 1);
        segment.push(start_state.clone());
        for n in start..end {
            let next = forward(&segment[n - start], n)?;
            segment.push(next);
        }
        for n in (start..end).rev() {
            costates[n] = adjoint_step(
                &st,
                steps,
                n + 1,
                &segment[n + 1 - start],
                target.frame(n + 1),
                &costates[n + 1],
                kappa,
                opts.flip_transport,
            )?;
        }
    }
    Ok(AdjointTrajectory::from_costates(tg, costates))
}
