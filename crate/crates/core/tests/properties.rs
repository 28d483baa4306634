//! Invariants that hold for any admissible input.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsvd::cli::config::parse_config;
use nsvd::control::{project_box, vi_residual, BoxConstraints};
use nsvd::fields::snapshot::{read_snapshot, write_snapshot, SnapshotKind};
use nsvd::fields::{PeriodicGrid, PhysicalField, SpectralField};
use nsvd::operators::{monotonicity_constant, DampingExponent};
use nsvd::params::ModelParams;
use nsvd::state::{energy_balance_residual, solve_forward, ControlSchedule, TimeGrid};
use nsvd::vec3::Vec3;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn grid8() -> PeriodicGrid {
    PeriodicGrid::new(8, TWO_PI).unwrap()
}

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    [-range..range, -range..range, -range..range]
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(5.0), 1.0..9.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leray_is_idempotent_and_solenoidal(seed in any::<u64>()) {
        let g = grid8();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = PhysicalField::random(&g, &mut rng, 1.0).to_spectral();
        let p = a.leray_project();
        let scale = p.l2_norm_sq().sqrt().max(1.0);
        prop_assert!(p.leray_project().sub(&p).l2_norm_sq().sqrt() <= 1e-13 * scale);
        prop_assert!(p.divergence_residual() <= 1e-12);
        // projection never increases the norm
        prop_assert!(p.l2_norm_sq() <= a.l2_norm_sq() * (1.0 + 1e-14));
    }

    #[test]
    fn transforms_round_trip_on_retained_modes(seed in any::<u64>(), amp in 0.01..10.0f64) {
        let g = grid8();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = SpectralField::random_divfree(&g, &mut rng, amp);
        prop_assert!(u.hermitian_defect() <= 1e-14 * amp);
        let back = u.to_physical().to_spectral();
        prop_assert!(back.max_diff(&u) <= 1e-13 * amp);
    }

    #[test]
    fn box_projection_is_a_contraction(seed in any::<u64>(), lo in -2.0..0.0f64, width in 0.0..3.0f64) {
        let g = PeriodicGrid::new(4, TWO_PI).unwrap();
        let tg = TimeGrid::new(0.1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ControlSchedule::random(&g, tg, &mut rng, 3.0);
        let b = ControlSchedule::random(&g, tg, &mut rng, 3.0);
        let bx = BoxConstraints::uniform(lo, lo + width).unwrap();
        let pa = project_box(&a, &bx);
        prop_assert!(bx.contains(&pa, 0.0));
        prop_assert_eq!(project_box(&pa, &bx).max_diff(&pa), 0.0);
        let pb = project_box(&b, &bx);
        prop_assert!(pa.sub(&pb).l2_norm() <= a.sub(&b).l2_norm() * (1.0 + 1e-14));
        // a zero gradient is stationary for any feasible control
        let zero = ControlSchedule::zeros(&g, tg);
        prop_assert_eq!(vi_residual(&pa, &zero, &bx), 0.0);
    }

    #[test]
    fn damping_derivatives_are_symmetric(r in exponent(), p in vec3(2.0), q in vec3(1.0), w in vec3(1.0), h in vec3(1.0)) {
        let e = DampingExponent::new(r).unwrap();
        if r >= 2.0 {
            prop_assert_eq!(e.d2(p, q, w).unwrap(), e.d2(p, w, q).unwrap());
        }
        if r >= 3.0 {
            let a = e.d3(p, q, w, h).unwrap();
            for perm in [e.d3(p, w, q, h), e.d3(p, h, w, q), e.d3(p, q, h, w)] {
                prop_assert_eq!(a, perm.unwrap());
            }
        }
        // f is odd and homogeneous of degree r
        let fp = e.value(p);
        let fm = e.value([-p[0], -p[1], -p[2]]);
        let f2 = e.value([2.0 * p[0], 2.0 * p[1], 2.0 * p[2]]);
        let s = 2f64.powf(r);
        for c in 0..3 {
            prop_assert_eq!(fp[c], -fm[c]);
            prop_assert!((f2[c] - s * fp[c]).abs() <= 1e-12 * s * fp[c].abs().max(1e-300));
        }
    }

    #[test]
    fn damping_is_strongly_monotone(r in exponent(), a in vec3(5.0), b in vec3(5.0)) {
        let e = DampingExponent::new(r).unwrap();
        let (fa, fb) = (e.value(a), e.value(b));
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let lhs = (fa[0] - fb[0]) * d[0] + (fa[1] - fb[1]) * d[1] + (fa[2] - fb[2]) * d[2];
        let nd = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let rhs = monotonicity_constant(e) * nd.powf(r + 1.0);
        prop_assert!(lhs >= rhs - 1e-12 * lhs.abs());
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(seed in any::<u64>(), time in -1e3..1e3f64, costate in any::<bool>()) {
        let g = PeriodicGrid::new(4, 3.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = PhysicalField::random(&g, &mut rng, 7.0);
        let kind = if costate { SnapshotKind::Costate } else { SnapshotKind::State };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, kind, time, &f).unwrap();
        let s = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(s.kind, kind);
        prop_assert_eq!(s.time.to_bits(), time.to_bits());
        prop_assert!(s.field.grid().same_as(&g));
        prop_assert_eq!(s.field.values(), f.values());
    }

    #[test]
    fn overrides_reach_typed_fields(r in 1.0..9.0f64, steps in 1usize..500, seed in any::<u32>()) {
        let cfg = parse_config("", &[
            format!("model.r={r:?}"),
            format!("time.steps={steps}"),
            format!("seed={seed}"),
        ]).unwrap();
        prop_assert_eq!(cfg.model.r, r);
        prop_assert_eq!(cfg.time.steps, steps);
        prop_assert_eq!(cfg.seed, seed as u64);
        // the resolved config reparses to itself
        prop_assert_eq!(parse_config(&cfg.to_text(), &[]).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn uncontrolled_energy_decays(seed in any::<u64>(), r in exponent(), amp in 0.1..5.0f64) {
        let g = grid8();
        let tg = TimeGrid::new(0.2, 10).unwrap();
        let p = ModelParams::new(0.1, 0.05, 0.5, 0.5, r, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = SpectralField::random_divfree(&g, &mut rng, amp);
        // damping is explicit, so decay needs a small damping stiffness number
        let umax = u0.to_physical().max_norm();
        prop_assume!(tg.dt() * p.beta * r * umax.powf(r - 1.0) <= 0.5);
        let zero = ControlSchedule::zeros(&g, tg);
        let traj = solve_forward(&u0, &zero, &p).unwrap();
        let bal = energy_balance_residual(&traj, &zero, &p).unwrap();
        prop_assert!(bal.strictly_decreasing());
        prop_assert!(bal.max_scheme_residual() <= 1e-10);
        for u in traj.states() {
            prop_assert!(u.divergence_residual() <= 1e-12 * amp);
            prop_assert!(u.hermitian_defect() <= 1e-13 * amp);
        }
    }
}
