//! CSV emission: comma-separated with a header row, `#`-prefixed comment
//! lines carrying the spec echo and per-point validity reports, floats at 17
//! significant digits, and one slope summary line per sub-run.

use std::io::Write;

use super::{spec_file, ExperimentKind, ExperimentResult, ExperimentSpec, SweepPoint};
use crate::analysis::{macro_distance_bound, reduction_error_bound};
use crate::error::Result;

/// 17 significant digits; NaN (inapplicable bounds) prints as `nan`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn header_for(kind: ExperimentKind, bounds: bool) -> String {
    let base = match kind {
        ExperimentKind::DtMacroScaling => "dt_micro,dt_macro,t_delta,n,d_n,E_d,bound_E_d",
        ExperimentKind::EpsScaling => "eps,t_delta,n,d_n,E_d,bound_E_d",
        ExperimentKind::DnScaling => "dt_micro,x0_offset,d_00,d_n,t_delta,n,E_d,bound_E_d",
    };
    if bounds {
        format!("{base},bound_d_n,bound_E_c,bound_total")
    } else {
        base.to_string()
    }
}

fn row_for(kind: ExperimentKind, p: &SweepPoint) -> String {
    match kind {
        ExperimentKind::DtMacroScaling => format!(
            "{},{},{},{},{},{},{}",
            fmt17(p.cfg.dt_micro()),
            fmt17(p.cfg.dt_macro()),
            fmt17(p.cfg.t_delta()),
            p.n_steps,
            fmt17(p.d_n),
            fmt17(p.e_d),
            fmt17(p.bound_e_d),
        ),
        ExperimentKind::EpsScaling => format!(
            "{},{},{},{},{},{}",
            fmt17(p.eps),
            fmt17(p.cfg.t_delta()),
            p.n_steps,
            fmt17(p.d_n),
            fmt17(p.e_d),
            fmt17(p.bound_e_d),
        ),
        ExperimentKind::DnScaling => format!(
            "{},{},{},{},{},{},{},{}",
            fmt17(p.cfg.dt_micro()),
            fmt17(p.x0_offset),
            fmt17(p.d_00),
            fmt17(p.d_n),
            fmt17(p.cfg.t_delta()),
            p.n_steps,
            fmt17(p.e_d),
            fmt17(p.bound_e_d),
        ),
    }
}

fn sweep_key(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::DtMacroScaling => "dt_macro",
        ExperimentKind::EpsScaling => "eps",
        ExperimentKind::DnScaling => "x0_offset",
    }
}

fn extra_bounds(spec: &ExperimentSpec, p: &SweepPoint) -> (f64, f64, f64) {
    let ledger = spec.ledger().with_initial_offsets(p.d_00, 0.0);
    let bound_d_n = macro_distance_bound(&ledger, &p.cfg, p.eps, p.d_00).unwrap_or(f64::NAN);
    let t_end = p.n_steps as f64 * p.cfg.t_delta();
    let bound_e_c = reduction_error_bound(&ledger, p.eps, t_end);
    (bound_d_n, bound_e_c, bound_e_c + p.bound_e_d)
}

fn write_inner(
    out: &mut impl Write,
    title: &str,
    specs: &[ExperimentSpec],
    results: &[ExperimentResult],
    bounds: bool,
) -> Result<()> {
    assert_eq!(specs.len(), results.len());
    let kind = specs[0].kind;

    writeln!(out, "# {title}")?;
    for (i, spec) in specs.iter().enumerate() {
        for line in spec_file::to_lines(spec) {
            writeln!(out, "# spec[{i}]: {line}")?;
        }
    }
    let key = sweep_key(kind);
    for (i, result) in results.iter().enumerate() {
        for p in &result.points {
            let tag = match kind {
                ExperimentKind::DnScaling => fmt17(p.x0_offset),
                ExperimentKind::EpsScaling => fmt17(p.eps),
                ExperimentKind::DtMacroScaling => fmt17(p.cfg.dt_macro()),
            };
            writeln!(out, "# assumptions[{i}][{key}={tag}]: {}", p.report.one_line())?;
        }
    }
    writeln!(out, "{}", header_for(kind, bounds))?;
    for (spec, result) in specs.iter().zip(results) {
        for p in &result.points {
            if bounds {
                let (bd, bc, bt) = extra_bounds(spec, p);
                writeln!(
                    out,
                    "{},{},{},{}",
                    row_for(kind, p),
                    fmt17(bd),
                    fmt17(bc),
                    fmt17(bt)
                )?;
            } else {
                writeln!(out, "{}", row_for(kind, p))?;
            }
        }
    }
    for (i, result) in results.iter().enumerate() {
        writeln!(
            out,
            "# slope[{i}] = {} intercept[{i}] = {} residual[{i}] = {}",
            fmt17(result.slope),
            fmt17(result.intercept),
            fmt17(result.residual)
        )?;
    }
    Ok(())
}

/// Write the measurement CSV for one or more sub-runs of the same kind.
pub fn write_run_csv(
    out: &mut impl Write,
    title: &str,
    specs: &[ExperimentSpec],
    results: &[ExperimentResult],
) -> Result<()> {
    write_inner(out, title, specs, results, false)
}

/// Write the CSV with all bound evaluations alongside the measurements.
pub fn write_bounds_csv(
    out: &mut impl Write,
    title: &str,
    specs: &[ExperimentSpec],
    results: &[ExperimentResult],
) -> Result<()> {
    write_inner(out, title, specs, results, true)
}
