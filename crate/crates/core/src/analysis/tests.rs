use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::integrators::{
    integrate_reduced_at, integrate_reference_at, integrate_steps, micro_burst, Scheme,
    SchemeConfig, SchemeKind, TrajectoryConfig,
};
use crate::system::{decay_system, MultiscaleSystem, State, ToySystemParams};

fn toy(a: f64, b: f64, eps: f64) -> MultiscaleSystem {
    MultiscaleSystem::toy(ToySystemParams { a, b }, eps)
}

fn fig2_cfg(eps: f64) -> SchemeConfig {
    SchemeConfig::new(0.1 * eps, 1e-3, 90).unwrap()
}

#[test]
fn presets_carry_published_constants() {
    let f2 = ConstantsLedger::fig2();
    assert_eq!((f2.l_f, f2.l_g, f2.c_g, f2.c_star), (0.2, 2.0, 1.0, 2.0));
    assert_eq!(f2.l_g_reduced, 2.0 * 1.2);
    let f3 = ConstantsLedger::fig3();
    assert_eq!((f3.l_f, f3.l_g, f3.c_g, f3.c_star), (1.0, 2.0, 7.0, 6.0));
    let f4 = ConstantsLedger::fig4();
    assert_eq!((f4.l_f, f4.l_g, f4.c_g, f4.c_star), (1.0, 1.0, 290.0, 6.0));
    assert!(ConstantsLedger::preset("fig3").is_some());
    assert!(ConstantsLedger::preset("fig5").is_none());
}

#[test]
fn ledger_reduced_constants_cannot_exceed_defaults() {
    let base = ConstantsLedger::new(0.5, 2.0, 1.0, 3.0, 1.0, 1.0).unwrap();
    assert!(base.clone().with_reduced_constants(3.0, 3.0).is_ok());
    assert!(base.clone().with_reduced_constants(3.1, 3.0).is_err());
    assert!(base.with_reduced_constants(3.0, 3.2).is_err());
}

#[test]
fn assumptions_reference_config_all_ok() {
    let eps = 1e-5;
    let report = check_assumptions(&ConstantsLedger::fig2(), &fig2_cfg(eps), eps);
    // l_g (1 + l_f) M dt = 2 * 1.2 * 90 * 1e-6 = 2.16e-4 <= 1
    assert!(report.burst_duration_ok);
    assert!(report.step_scales_ok);
    assert!(report.contraction_ok);
    assert_eq!(report.branch, StepBranch::Small);
    assert!(report.all_ok());
}

#[test]
fn assumptions_boundary_step_degenerates_large_branch() {
    let eps = 1e-5;
    let cfg = SchemeConfig::new(2.0 * eps, 1e-3, 50).unwrap(); // dt = 2 eps / lambda
    let report = check_assumptions(&ConstantsLedger::fig2(), &cfg, eps);
    assert!(report.step_scales_ok); // the inequality is inclusive
    assert_eq!(report.branch, StepBranch::Large);
    assert_eq!(report.dt_star, 0.0);
    assert!(!report.contraction_ok); // degenerate decay step contracts nothing
    assert!(report.details.iter().any(|d| d.contains("degenerate")));
}

#[test]
fn assumptions_eps_experiment_violates_step_scales() {
    // DT = 1e-4 below 2 eps for every swept eps >= 1.25e-4
    let ledger = ConstantsLedger::fig3();
    let cfg = SchemeConfig::new(1e-6, 1e-4, 100).unwrap();
    for &eps in &[1.25e-4, 5e-4, 1e-3] {
        let report = check_assumptions(&ledger, &cfg, eps);
        assert!(!report.step_scales_ok, "eps = {eps}");
    }
}

#[test]
fn branch_boundary_tie_goes_small() {
    let eps = 1e-4;
    let lambda = 3.0;
    let boundary = 2.0 * eps / (lambda + 1.0);
    let (branch, eff) = classify_step_branch(boundary, eps, lambda).unwrap();
    assert_eq!(branch, StepBranch::Small);
    assert_eq!(eff, boundary);
}

#[test]
fn burst_bound_zero_steps_keeps_initial_distance() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let b = burst_distance_bound(&led, eps, 0.1 * eps, 0, 0.3).unwrap();
    assert_relative_eq!(b, 0.3 + eps * 0.2, max_relative = 1e-14);
}

#[test]
fn burst_bound_on_manifold_start_is_pure_drift() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    for m in [1, 10, 1000] {
        let b = burst_distance_bound(&led, eps, 0.1 * eps, m, 0.0).unwrap();
        assert_relative_eq!(b, eps * 0.2, max_relative = 1e-14);
    }
}

#[test]
fn burst_bound_frozen_values() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let small = burst_distance_bound(&led, eps, 1e-6, 90, 0.02).unwrap();
    assert_relative_eq!(small, 3.523546960917332e-6, max_relative = 1e-13);
    let large = burst_distance_bound(&led, eps, 1.6e-5, 90, 0.02).unwrap();
    assert_relative_eq!(large, 7.999999999999996e-6, max_relative = 1e-13);
}

#[test]
fn burst_bound_domain_error_outside_contraction() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    assert!(matches!(
        burst_distance_bound(&led, eps, 2.0 * eps, 10, 0.0),
        Err(Error::OutOfRange { .. })
    ));
    assert!(burst_distance_bound(&led, eps, 1.99 * eps, 10, 0.0).is_ok());
}

#[test]
fn burst_bound_dominates_measured_distances() {
    // reference-config burst from an off-manifold start, both step branches
    let eps = 1e-5;
    let sys = toy(1.0, 0.1, eps);
    let led = ConstantsLedger::fig2();
    for dt_frac in [0.1, 1.6] {
        let cfg = SchemeConfig::new(dt_frac * eps, 1e-3, 90).unwrap();
        let y0 = vec![1.0];
        let d0 = 0.02;
        let s = State::new(vec![sys.manifold(&y0).unwrap()[0] + d0], y0, 0.0);
        let burst = micro_burst(&sys, &s, &cfg).unwrap();
        for (m, st) in burst.states.iter().enumerate() {
            let measured = sys.manifold_distance(&st.x, &st.y).unwrap();
            let bound = burst_distance_bound(&led, eps, cfg.dt_micro(), m, d0).unwrap();
            assert!(
                measured <= bound,
                "dt = {dt_frac} eps, m = {m}: {measured} > {bound}"
            );
        }
    }
}

#[test]
fn macro_bound_vanishes_with_macro_step() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let cfg = SchemeConfig::new(0.1 * eps, 1e-12, 90).unwrap();
    let b = macro_distance_bound(&led, &cfg, eps, 0.0).unwrap();
    assert!(b < 1e-10, "bound {b}");
}

#[test]
fn macro_bound_frozen_value() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let b = macro_distance_bound(&led, &fig2_cfg(eps), eps, 0.02).unwrap();
    assert_relative_eq!(b, 0.020404998073287994, max_relative = 1e-13);
}

#[test]
fn macro_bound_dominates_reference_run() {
    let eps = 1e-5;
    let sys = toy(1.0, 0.1, eps);
    let led = ConstantsLedger::fig2();
    let cfg = fig2_cfg(eps);
    let y0 = vec![1.0];
    let s = State::new(sys.manifold(&y0).unwrap(), y0, 0.0);
    let traj = integrate_steps(&sys, &s, &cfg, &Scheme::Projective, 200, false).unwrap();
    let bound = macro_distance_bound(&led, &cfg, eps, 0.0).unwrap();
    for (i, st) in traj.states.iter().enumerate() {
        let d = sys.manifold_distance(&st.x, &st.y).unwrap();
        assert!(d <= bound, "step {i}: {d} > {bound}");
    }
}

#[test]
fn macro_bound_inapplicable_when_contraction_fails() {
    // off-manifold experiment parameters: DT exp(-M dt/eps) > eps / lambda
    let led = ConstantsLedger::fig4();
    let eps = 1e-4;
    let cfg = SchemeConfig::new(0.01 * eps, 1e-3, 100).unwrap();
    assert!(matches!(
        macro_distance_bound(&led, &cfg, eps, 0.01),
        Err(Error::BoundInapplicable(_))
    ));
}

#[test]
fn reduction_bound_zero_time_zero_offsets() {
    let led = ConstantsLedger::fig2();
    assert_eq!(reduction_error_bound(&led, 1e-4, 0.0), 0.0);
}

#[test]
fn reduction_bound_linear_in_eps() {
    let led = ConstantsLedger::fig3(); // offsets zero, so C1 is eps-free
    let t = 0.01;
    let b1 = reduction_error_bound(&led, 1e-4, t);
    let b2 = reduction_error_bound(&led, 5e-5, t);
    assert_relative_eq!(b2, b1 / 2.0, max_relative = 1e-15);
}

#[test]
fn reduction_bound_dominates_measured_gap() {
    // Time-scale experiment configuration. The published ledger understates
    // the x-sensitivity of the slow field near y = 5 (|dg/dx| = |y| ~ 5), so
    // the domination check uses constants valid for the visited region.
    let eps = 1e-4;
    let t_final = 0.01;
    let sys = toy(0.1, 1.0, eps);
    let y0 = vec![5.0];
    let s = State::new(sys.manifold(&y0).unwrap(), y0.clone(), 0.0);
    let full = integrate_reference_at(&sys, &s, eps / 20.0, &[0.0, t_final]).unwrap();
    let reduced = integrate_reduced_at(&sys, &y0, eps / 20.0, &[0.0, t_final]).unwrap();
    let measured = (full.final_state().y[0] - reduced.final_state().y[0]).abs();

    let regional = ConstantsLedger::new(1.0, 5.5, 1.0, 7.2, 6.0, 1.0).unwrap();
    let bound = reduction_error_bound(&regional, eps, t_final);
    assert_relative_eq!(bound, 4.420461159017131e-5, max_relative = 1e-13);
    assert!(measured <= bound, "{measured} > {bound}");
    // sanity: the gap really is of order eps here
    assert!(measured >= 1e-5, "unexpectedly small gap {measured}");
}

#[test]
fn discretization_bound_frozen_values() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let small = discretization_error_bound(&led, &fig2_cfg(eps), eps, 100, 5e-4).unwrap();
    assert_relative_eq!(small, 0.003561424886938173, max_relative = 1e-13);
    let cfg_large = SchemeConfig::new(1.6 * eps, 1e-3, 90).unwrap();
    let large = discretization_error_bound(&led, &cfg_large, eps, 100, 5e-4).unwrap();
    assert_relative_eq!(large, 0.0438970081754332, max_relative = 1e-13);
}

#[test]
fn discretization_bound_limits_to_zero() {
    let led = ConstantsLedger::new(0.2, 2.0, 1.0, 1.0, 0.0, 1.0).unwrap();
    let eps = 1e-30;
    let cfg = SchemeConfig::new(0.5 * eps, 3.0 * eps, 10).unwrap();
    let b = discretization_error_bound(&led, &cfg, eps, 5, 0.0).unwrap();
    assert!(b <= 1e-25, "bound {b}");
}

#[test]
fn discretization_bound_grows_with_macro_step_at_fixed_horizon() {
    // n * t_delta = 1 for both configurations; the curvature term makes the
    // bound increase with DT
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let m = 90;
    let mut last = 0.0;
    for &n in &[918usize, 48] {
        let dt_macro = 1.0 / n as f64 - m as f64 * 0.1 * eps;
        let cfg = SchemeConfig::new(0.1 * eps, dt_macro, m).unwrap();
        let b = discretization_error_bound(&led, &cfg, eps, n, 1e-4).unwrap();
        assert!(b > last);
        last = b;
    }
}

#[test]
fn discretization_bound_monotone_in_dn_and_curvature() {
    let led = ConstantsLedger::fig2();
    let eps = 1e-5;
    let cfg = fig2_cfg(eps);
    let b1 = discretization_error_bound(&led, &cfg, eps, 50, 1e-4).unwrap();
    let b2 = discretization_error_bound(&led, &cfg, eps, 50, 2e-4).unwrap();
    assert!(b2 > b1);
    let mut led_hi = led.clone();
    led_hi.c_star = 4.0;
    let b3 = discretization_error_bound(&led_hi, &cfg, eps, 50, 1e-4).unwrap();
    assert!(b3 > b1);
}

#[test]
fn total_bound_is_exact_sum_of_parts() {
    let led = ConstantsLedger::fig2().with_initial_offsets(0.01, 0.5);
    let eps = 1e-5;
    let cfg = fig2_cfg(eps);
    let n = 77;
    let total = total_error_bound(&led, &cfg, eps, n, 3e-4).unwrap();
    let red = reduction_error_bound(&led, eps, n as f64 * cfg.t_delta());
    let disc = discretization_error_bound(&led, &cfg, eps, n, 3e-4).unwrap();
    assert_eq!(total, red + disc);
    assert_eq!(total_error_bound(&led, &cfg, eps, 0, 0.0).unwrap(), {
        let r = reduction_error_bound(&led, eps, 0.0);
        r + discretization_error_bound(&led, &cfg, eps, 0, 0.0).unwrap()
    });
}

#[test]
fn measured_errors_vanish_against_matching_oracle() {
    let eps = 1e-4;
    let sys = toy(1.0, 0.5, eps);
    let cfg = SchemeConfig::new(0.5 * eps, 3.0 * eps, 10).unwrap();
    let y0 = vec![1.0];
    let s = State::new(sys.manifold(&y0).unwrap(), y0.clone(), 0.0);
    let traj = integrate_steps(&sys, &s, &cfg, &Scheme::Projective, 5, false).unwrap();
    let times: Vec<f64> = traj.times().collect();
    let full = integrate_reference_at(&sys, &s, eps / 20.0, &times).unwrap();
    let reduced = integrate_reduced_at(&sys, &y0, eps / 20.0, &times).unwrap();

    // a trajectory that copies the full oracle must report zero total error
    let copied = crate::integrators::Trajectory {
        states: full.states.clone(),
        kind: SchemeKind::Projective,
        config: TrajectoryConfig::Scheme(cfg),
        micro_bursts: None,
    };
    let e = measure_errors(&sys, &copied, &full, &reduced).unwrap();
    assert!(e.total.values.iter().all(|&v| v == 0.0));
    assert_eq!(e.total.kind, ErrorKind::Total);
}

#[test]
fn measured_errors_zero_for_trivial_system() {
    let eps = 1e-3;
    let sys = decay_system(1, vec![1.0], eps);
    let cfg = SchemeConfig::new(0.5 * eps, 3.0 * eps, 4).unwrap();
    let s = State::new(vec![0.0], vec![1.0], 0.0); // on the (zero) manifold
    let traj = integrate_steps(&sys, &s, &cfg, &Scheme::Projective, 4, false).unwrap();
    let times: Vec<f64> = traj.times().collect();
    let full = integrate_reference_at(&sys, &s, eps / 20.0, &times).unwrap();
    let reduced = integrate_reduced_at(&sys, &[1.0], eps / 20.0, &times).unwrap();
    let e = measure_errors(&sys, &traj, &full, &reduced).unwrap();
    for series in [
        &e.total,
        &e.reduction_gap,
        &e.discretization,
        &e.burst_start_distance,
        &e.running_max_distance,
    ] {
        assert!(series.values.iter().all(|&v| v == 0.0), "{:?}", series.kind);
    }
}

#[test]
fn measured_distance_series_starts_at_initial_offset() {
    let eps = 1e-4;
    let sys = toy(1.0, 1.0, eps);
    let cfg = SchemeConfig::new(0.01 * eps, 1e-3, 100).unwrap();
    let y0 = vec![1.0];
    let s = State::new(vec![sys.manifold(&y0).unwrap()[0] + 0.01], y0.clone(), 0.0);
    let traj = integrate_steps(&sys, &s, &cfg, &Scheme::Projective, 2, false).unwrap();
    let times: Vec<f64> = traj.times().collect();
    let full = integrate_reference_at(&sys, &s, eps / 20.0, &times).unwrap();
    let reduced = integrate_reduced_at(&sys, &y0, eps / 20.0, &times).unwrap();
    let e = measure_errors(&sys, &traj, &full, &reduced).unwrap();
    assert_relative_eq!(e.burst_start_distance.values[0], 0.01, max_relative = 1e-12);
    assert_eq!(e.running_max_distance.values[0], 0.0);
    assert_relative_eq!(e.running_max_distance.values[1], 0.01, max_relative = 1e-12);
}

#[test]
fn measure_errors_requires_oracle_coverage() {
    let eps = 1e-4;
    let sys = toy(1.0, 0.5, eps);
    let cfg = SchemeConfig::new(0.5 * eps, 3.0 * eps, 10).unwrap();
    let y0 = vec![1.0];
    let s = State::new(sys.manifold(&y0).unwrap(), y0.clone(), 0.0);
    let traj = integrate_steps(&sys, &s, &cfg, &Scheme::Projective, 5, false).unwrap();
    let short_times = [0.0, traj.states[1].t];
    let full = integrate_reference_at(&sys, &s, eps / 20.0, &short_times).unwrap();
    let reduced = integrate_reduced_at(&sys, &y0, eps / 20.0, &short_times).unwrap();
    assert!(matches!(
        measure_errors(&sys, &traj, &full, &reduced),
        Err(Error::UncoveredTimestamp { .. })
    ));
}

#[test]
fn estimated_constants_bracket_the_toy_system() {
    let sys = toy(1.0, 0.1, 1e-5);
    let led = estimate_constants(&sys, &[(0.0, 0.1)], &[(0.1, 1.0)], 9).unwrap();
    // |f| = sin^2(0.1 y) <= sin^2(0.1); slope bounded by b
    assert!(led.c_f <= 0.011);
    assert!(led.l_f <= 0.1 + 1e-3, "l_f = {}", led.l_f);
    // |dg/dy| = |x + 2y| peaks near 2.1 on this box; |dg/dx| = |y| <= 1
    assert!(led.l_g >= 1.0 && led.l_g <= 2.2, "l_g = {}", led.l_g);
    assert!(led.c_g <= 1.2);
    // sup |G' G| on this box sits near 2.05
    assert!(led.c_star >= 1.8 && led.c_star <= 2.2, "c_star = {}", led.c_star);
    assert_eq!(led.lambda_max, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The three branch-dependent evaluators classify identically for the
    /// same (dt, eps, lambda).
    #[test]
    fn prop_branch_consistency(
        log_eps in -6.0_f64..-2.0,
        frac in 0.01_f64..0.999,
        lambda in 1.0_f64..4.0,
        m in 1_usize..200,
        dt_ratio in 2.1_f64..50.0,
    ) {
        let eps = 10f64.powf(log_eps);
        let dt = frac * 2.0 * eps / lambda;
        let led = ConstantsLedger::new(0.2, 2.0, 1.0, 1.0, 2.0, lambda).unwrap();
        let cfg = SchemeConfig::new(dt, dt_ratio * eps, m).unwrap();
        let (branch, eff) = classify_step_branch(dt, eps, lambda).unwrap();
        match branch {
            StepBranch::Small => prop_assert_eq!(eff, dt),
            StepBranch::Large => {
                prop_assert!(dt > 2.0 * eps / (lambda + 1.0));
                prop_assert!(eff > 0.0 && eff < 2.0 * eps / (lambda + 1.0));
            }
        }
        // evaluators agree with the classification (and with each other)
        let b_burst = burst_distance_bound(&led, eps, dt, m, 0.0).unwrap();
        let drift = eps * led.l_f * led.c_g;
        match branch {
            StepBranch::Small => prop_assert!((b_burst - drift).abs() <= 1e-18 + 1e-12 * drift),
            StepBranch::Large => prop_assert!(b_burst >= drift * (1.0 - 1e-12)),
        }
        let report = check_assumptions(&led, &cfg, eps);
        prop_assert_eq!(report.branch, branch);
        if let Ok(b) = discretization_error_bound(&led, &cfg, eps, 3, 0.0) {
            prop_assert!(b.is_finite() && b >= 0.0);
        }
    }

    /// The total bound is the exact sum of its two parts.
    #[test]
    fn prop_total_bound_is_sum(
        log_eps in -6.0_f64..-3.0,
        frac in 0.05_f64..1.9,
        m in 1_usize..100,
        n in 1_usize..200,
        dn in 0.0_f64..0.3,
    ) {
        let eps = 10f64.powf(log_eps);
        let led = ConstantsLedger::fig2().with_initial_offsets(dn, 0.1);
        let cfg = SchemeConfig::new(frac * eps, 5.0 * eps, m).unwrap();
        let total = total_error_bound(&led, &cfg, eps, n, dn).unwrap();
        let t = n as f64 * cfg.t_delta();
        let sum = reduction_error_bound(&led, eps, t)
            + discretization_error_bound(&led, &cfg, eps, n, dn).unwrap();
        prop_assert_eq!(total, sum);
    }
}
