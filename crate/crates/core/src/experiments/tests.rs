use approx::assert_relative_eq;

use super::*;
use crate::error::Error;

#[test]
fn loglog_identity_line() {
    let (s, i, r) = loglog_slope(&[1.0, 10.0], &[1.0, 10.0]).unwrap();
    assert_relative_eq!(s, 1.0, max_relative = 1e-14);
    assert!(i.abs() <= 1e-14);
    assert!(r <= 1e-14);
}

#[test]
fn loglog_flat_line() {
    let (s, _, _) = loglog_slope(&[1.0, 10.0], &[2.0, 2.0]).unwrap();
    assert!(s.abs() <= 1e-15);
}

#[test]
fn loglog_exact_power_law() {
    let xs: Vec<f64> = (1..=5).map(|k| k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
    let (s, i, r) = loglog_slope(&xs, &ys).unwrap();
    assert!((s - 1.5).abs() <= 1e-12);
    assert!((i - 3.0_f64.ln()).abs() <= 1e-12);
    assert!(r <= 1e-12);
}

#[test]
fn loglog_synthetic_proportional_errors() {
    // errors exactly proportional to the macro step fit slope 1
    let dts = presets::log_spaced(1e-3, 2e-2, 10);
    let errs: Vec<f64> = dts.iter().map(|d| 0.37 * d).collect();
    let (s, _, r) = loglog_slope(&dts, &errs).unwrap();
    assert!((s - 1.0).abs() <= 1e-12);
    assert!(r <= 1e-12);
}

#[test]
fn loglog_rejects_bad_domains() {
    assert!(matches!(loglog_slope(&[1.0], &[1.0]), Err(Error::Regression(_))));
    assert!(matches!(loglog_slope(&[1.0, -2.0], &[1.0, 1.0]), Err(Error::Regression(_))));
    assert!(matches!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]), Err(Error::Regression(_))));
    assert!(matches!(loglog_slope(&[1.0, 2.0], &[1.0]), Err(Error::Regression(_))));
}

#[test]
fn presets_enumerate_three() {
    assert_eq!(PRESET_NAMES.len(), 3);
    for name in PRESET_NAMES {
        let specs = preset(name).unwrap();
        assert!(!specs.is_empty());
        for spec in &specs {
            spec.validate().unwrap();
        }
        assert!(preset_description(name).is_some());
    }
    assert!(preset("fig1").is_none());
}

#[test]
fn fig2_grid_matches_published_iteration_range() {
    let specs = preset("fig2").unwrap();
    assert_eq!(specs.len(), 2);
    // first sub-run: endpoints derived from n = 918 and n = 48
    let s = &specs[0];
    assert_eq!(s.dt_micro, 1e-6);
    assert_relative_eq!(s.sweep[0], 1.0 / 918.0 - 9e-5, max_relative = 1e-12);
    assert_relative_eq!(s.sweep[9], 1.0 / 48.0 - 9e-5, max_relative = 1e-12);
    // second sub-run: the n = 918 endpoint is infeasible; clamped so the
    // macro step dominates the burst
    let s = &specs[1];
    assert_eq!(s.dt_micro, 1.6e-5);
    assert_relative_eq!(s.sweep[0], 4.0 * 90.0 * 1.6e-5, max_relative = 1e-12);
    assert_relative_eq!(s.sweep[9], 1.0 / 48.0 - 90.0 * 1.6e-5, max_relative = 1e-12);
}

#[test]
fn fig3_grid_bounded_by_macro_step_and_horizon() {
    let specs = preset("fig3").unwrap();
    assert_eq!(specs.len(), 1);
    let s = &specs[0];
    assert_eq!(s.sweep.len(), 8);
    assert_relative_eq!(s.sweep[0], 1.25e-4, max_relative = 1e-12);
    assert_relative_eq!(s.sweep[7], 1e-3, max_relative = 1e-12);
    assert!(matches!(s.horizon, Horizon::Steps(50)));
}

#[test]
fn spec_validation_rejects_inconsistent_sweeps() {
    let mut spec = preset("fig3").unwrap().remove(0);
    spec.x0_offsets = vec![0.1, 0.2, 0.3, 0.4];
    assert!(matches!(spec.validate(), Err(Error::Spec(_))));

    let mut spec = preset("fig2").unwrap().remove(0);
    spec.sweep = vec![1e-3, 1e-3, 2e-3, 3e-3]; // not strictly increasing
    assert!(matches!(spec.validate(), Err(Error::Spec(_))));

    let mut spec = preset("fig2").unwrap().remove(0);
    spec.sweep.truncate(3); // too few points
    assert!(matches!(spec.validate(), Err(Error::Spec(_))));
}

#[test]
fn spec_file_round_trip() {
    for name in PRESET_NAMES {
        for spec in preset(name).unwrap() {
            let text = spec_file::to_string(&spec);
            let parsed = spec_file::parse(&text).unwrap();
            assert_eq!(parsed, spec, "{name}");
        }
    }
}

#[test]
fn spec_file_accepts_comments_and_whitespace() {
    let text = "\n# a comment\nkind = eps_scaling  # trailing comment\na = 0.1\nb = 1.0\n\
                dt_micro = 1e-6\ndt_macro = 1e-4\nnum_micro = 100\n\
                sweep = 1.25e-4 2.5e-4, 5e-4, 1e-3\ny0 = 5.0\nn_steps = 50\nledger_preset = fig3\n";
    let spec = spec_file::parse(text).unwrap();
    assert_eq!(spec.kind, ExperimentKind::EpsScaling);
    assert_eq!(spec.sweep.len(), 4);
    assert_eq!(spec.eps, 1.25e-4); // defaults to the first swept value
}

#[test]
fn spec_file_rejects_malformed_input() {
    assert!(matches!(spec_file::parse("kind = eps_scaling\nbogus = 1\n"), Err(Error::Spec(_))));
    assert!(matches!(spec_file::parse("kind eps_scaling\n"), Err(Error::Spec(_))));
    let both = "kind = eps_scaling\na = 0.1\nb = 1.0\ndt_micro = 1e-6\ndt_macro = 1e-4\n\
                num_micro = 100\nsweep = 1e-4, 2e-4, 4e-4, 8e-4\ny0 = 5.0\n\
                t_final = 0.01\nn_steps = 50\nledger_preset = fig3\n";
    assert!(matches!(spec_file::parse(both), Err(Error::Spec(_))));
}

fn small_dt_spec() -> ExperimentSpec {
    ExperimentSpec {
        kind: ExperimentKind::DtMacroScaling,
        toy: crate::system::ToySystemParams { a: 1.0, b: 0.1 },
        eps: 1e-3,
        dt_micro: 5e-4,
        dt_macro: 5e-3,
        num_micro: 10,
        sweep: vec![5e-3, 1e-2, 2e-2, 4e-2],
        y0: 1.0,
        x0_offsets: Vec::new(),
        horizon: Horizon::FinalTime(0.5),
        ledger_preset: "fig2".into(),
    }
}

#[test]
fn dt_scaling_keeps_fixed_horizon_bookkeeping() {
    let spec = small_dt_spec();
    let result = run_dt_scaling(&spec).unwrap();
    assert_eq!(result.sweep_values, spec.sweep);
    assert_eq!(result.errors.len(), 4);
    assert!(result.slope.is_finite());
    let t_final = 0.5;
    for p in &result.points {
        let nt = p.n_steps as f64 * p.cfg.t_delta();
        assert!(
            nt <= t_final * (1.0 + 1e-12) && nt >= t_final - p.cfg.t_delta(),
            "n t_delta = {nt}"
        );
        assert!(p.e_d > 0.0);
    }
}

#[test]
fn dn_scaling_excludes_on_manifold_point() {
    let spec = ExperimentSpec {
        kind: ExperimentKind::DnScaling,
        toy: crate::system::ToySystemParams { a: 1.0, b: 1.0 },
        eps: 1e-3,
        dt_micro: 5e-4,
        dt_macro: 5e-3,
        num_micro: 10,
        sweep: Vec::new(),
        y0: 1.0,
        x0_offsets: vec![0.0, 0.05, 0.1, 0.2, 0.4],
        horizon: Horizon::Steps(3),
        ledger_preset: "fig4".into(),
    };
    let result = run_dn_scaling(&spec).unwrap();
    assert_eq!(result.points.len(), 5);
    assert_eq!(result.sweep_values.len(), 4); // offset 0 excluded
    assert!(!result.points[0].in_regression);
    // the regression abscissa is the measured distance, not the offset
    for p in result.points.iter().filter(|p| p.in_regression) {
        assert_eq!(p.sweep_value, p.d_n);
        assert!(p.d_n >= p.x0_offset * 0.5);
    }
}

#[test]
fn experiment_output_is_deterministic() {
    let spec = small_dt_spec();
    let r1 = run_experiment(&spec).unwrap();
    let r2 = run_experiment(&spec).unwrap();
    assert_eq!(r1, r2);
    let mut csv1 = Vec::new();
    csv::write_run_csv(&mut csv1, "test", std::slice::from_ref(&spec), &[r1]).unwrap();
    let mut csv2 = Vec::new();
    csv::write_run_csv(&mut csv2, "test", &[spec], &[r2]).unwrap();
    assert_eq!(csv1, csv2);
}

#[test]
fn run_csv_layout() {
    let spec = small_dt_spec();
    let result = run_experiment(&spec).unwrap();
    let mut buf = Vec::new();
    csv::write_run_csv(
        &mut buf,
        "test",
        std::slice::from_ref(&spec),
        std::slice::from_ref(&result),
    )
    .unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# test"));
    let header = lines
        .iter()
        .find(|l| !l.starts_with('#'))
        .expect("header row present");
    assert_eq!(*header, "dt_micro,dt_macro,t_delta,n,d_n,E_d,bound_E_d");
    assert!(text.lines().any(|l| l.starts_with("# spec[0]: kind = dt_macro_scaling")));
    assert!(text.lines().any(|l| l.starts_with("# assumptions[0][dt_macro=")));
    assert!(text.lines().any(|l| l.starts_with("# slope[0] = ")));
    // 17 significant digits on data rows
    let row = lines
        .iter()
        .find(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
        .unwrap();
    let first = row.split(',').next().unwrap();
    assert_eq!(first, "5.0000000000000001e-4");

    let mut buf = Vec::new();
    csv::write_bounds_csv(&mut buf, "test", &[spec], &[result]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text
        .lines()
        .any(|l| l == "dt_micro,dt_macro,t_delta,n,d_n,E_d,bound_E_d,bound_d_n,bound_E_c,bound_total"));
}

#[test]
fn kind_parses_and_displays() {
    for kind in [
        ExperimentKind::DtMacroScaling,
        ExperimentKind::EpsScaling,
        ExperimentKind::DnScaling,
    ] {
        let s = kind.to_string();
        assert_eq!(s.parse::<ExperimentKind>().unwrap(), kind);
    }
    assert!("other".parse::<ExperimentKind>().is_err());
}
