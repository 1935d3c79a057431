//! Configurable scaling experiments: parameter sweeps of the projective
//! scheme on the built-in reference system, realized-error measurement
//! against the reduced oracle, and log-log slope fits.
//!
//! Three experiment kinds are supported, one per swept dimension: the macro
//! step at fixed horizon, the time-scale parameter at fixed step counts, and
//! the initial distance of the fast variables from the slow manifold. Each
//! built-in preset reproduces one published configuration; see [`presets`].

pub mod csv;
pub mod presets;
pub mod spec_file;

pub use presets::{preset, preset_description, PRESET_NAMES};

use std::fmt;
use std::str::FromStr;

use crate::analysis::{
    check_assumptions, discretization_error_bound, AssumptionReport, ConstantsLedger,
};
use crate::error::{Error, Result};
use crate::inf_norm;
use crate::integrators::{integrate_reduced_at, integrate_steps, Scheme, SchemeConfig};
use crate::system::{MultiscaleSystem, State, ToySystemParams};

/// Oracle step divisor: the reduced reference runs at `min(DT, eps) / 20`.
const ORACLE_STEP_DIVISOR: f64 = 20.0;
/// Slack when converting a fixed horizon into a step count.
const HORIZON_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DtMacroScaling,
    EpsScaling,
    DnScaling,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::DtMacroScaling => "dt_macro_scaling",
            ExperimentKind::EpsScaling => "eps_scaling",
            ExperimentKind::DnScaling => "dn_scaling",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt_macro_scaling" => Ok(ExperimentKind::DtMacroScaling),
            "eps_scaling" => Ok(ExperimentKind::EpsScaling),
            "dn_scaling" => Ok(ExperimentKind::DnScaling),
            other => Err(Error::Spec(format!("unknown experiment kind `{other}`"))),
        }
    }
}

/// Fixed integration horizon: either a final time or an explicit step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    FinalTime(f64),
    Steps(usize),
}

/// A fully specified experiment. Exactly one dimension is swept, selected by
/// `kind`: the macro step (`sweep`), the time-scale parameter (`sweep`), or
/// the initial fast offset (`x0_offsets`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub toy: ToySystemParams,
    /// Base time-scale parameter; ignored (and overridden per point) when the
    /// kind sweeps it.
    pub eps: f64,
    pub dt_micro: f64,
    /// Base macro step; overridden per point when the kind sweeps it.
    pub dt_macro: f64,
    pub num_micro: usize,
    /// Swept values for the macro-step and time-scale kinds.
    pub sweep: Vec<f64>,
    pub y0: f64,
    /// Swept initial manifold offsets (off-manifold kind only).
    pub x0_offsets: Vec<f64>,
    pub horizon: Horizon,
    pub ledger_preset: String,
}

impl ExperimentSpec {
    /// Validate the single-swept-dimension rule and the field domains.
    pub fn validate(&self) -> Result<()> {
        let sweep_of = |v: &Vec<f64>, name: &str| -> Result<()> {
            if v.len() < 4 {
                return Err(Error::Spec(format!("{name} needs at least 4 points, got {}", v.len())));
            }
            for w in v.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::Spec(format!("{name} must be strictly increasing")));
                }
            }
            Ok(())
        };
        match self.kind {
            ExperimentKind::DtMacroScaling | ExperimentKind::EpsScaling => {
                sweep_of(&self.sweep, "sweep")?;
                if !self.x0_offsets.is_empty() {
                    return Err(Error::Spec(
                        "x0_offsets is only swept by dn_scaling; exactly one dimension may be swept"
                            .into(),
                    ));
                }
                if self.sweep.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Spec("sweep values must be positive".into()));
                }
            }
            ExperimentKind::DnScaling => {
                sweep_of(&self.x0_offsets, "x0_offsets")?;
                if !self.sweep.is_empty() {
                    return Err(Error::Spec(
                        "sweep is unused by dn_scaling; exactly one dimension may be swept".into(),
                    ));
                }
                if self.x0_offsets.iter().any(|&v| v < 0.0) {
                    return Err(Error::Spec("x0_offsets must be nonnegative".into()));
                }
            }
        }
        if self.kind != ExperimentKind::EpsScaling && !(self.eps > 0.0) {
            return Err(Error::Spec(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.dt_micro > 0.0) {
            return Err(Error::Spec(format!("dt_micro must be positive, got {}", self.dt_micro)));
        }
        if self.kind != ExperimentKind::DtMacroScaling && !(self.dt_macro > 0.0) {
            return Err(Error::Spec(format!("dt_macro must be positive, got {}", self.dt_macro)));
        }
        match self.horizon {
            Horizon::FinalTime(t) => {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::Spec(format!("t_final must be positive, got {t}")));
                }
            }
            Horizon::Steps(n) => {
                if n == 0 {
                    return Err(Error::Spec("n_steps must be at least 1".into()));
                }
            }
        }
        if !self.toy.a.is_finite() || !self.toy.b.is_finite() || !self.y0.is_finite() {
            return Err(Error::Spec("a, b and y0 must be finite".into()));
        }
        if ConstantsLedger::preset(&self.ledger_preset).is_none() {
            return Err(Error::Spec(format!(
                "unknown ledger preset `{}` (expected one of fig2, fig3, fig4)",
                self.ledger_preset
            )));
        }
        Ok(())
    }

    pub fn ledger(&self) -> ConstantsLedger {
        ConstantsLedger::preset(&self.ledger_preset).expect("validated preset name")
    }
}

/// Per-point record of one sweep run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// The value this point contributes to the regression abscissa.
    pub sweep_value: f64,
    /// Initial manifold offset (zero unless the offset is swept).
    pub x0_offset: f64,
    /// Measured initial manifold distance.
    pub d_00: f64,
    /// Measured running maximum of the burst-start distances (final step
    /// excluded).
    pub d_n: f64,
    pub n_steps: usize,
    pub cfg: SchemeConfig,
    pub eps: f64,
    /// Measured error against the reduced oracle at the final time.
    pub e_d: f64,
    /// Discretization bound evaluated with the measured `d_n`; NaN when the
    /// step lies outside the bound's domain.
    pub bound_e_d: f64,
    pub report: AssumptionReport,
    /// Whether the point enters the regression.
    pub in_regression: bool,
}

/// Swept values, measured errors and the fitted log-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Regression abscissae (swept values, or measured distances for the
    /// off-manifold kind).
    pub sweep_values: Vec<f64>,
    /// Measured errors at the final time, one per regression point.
    pub errors: Vec<f64>,
    pub slope: f64,
    /// Intercept in natural-log coordinates.
    pub intercept: f64,
    /// Largest absolute log-residual of the fit.
    pub residual: f64,
    /// Every executed point, including any excluded from the regression.
    pub points: Vec<SweepPoint>,
}

/// Ordinary least squares on `(ln x, ln y)`. Returns `(slope, intercept,
/// residual)` with the residual the largest absolute deviation in log space.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Regression(format!(
            "mismatched lengths: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Regression(format!("need at least 2 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Regression("inputs must be strictly positive and finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (u, v) in lx.iter().zip(&ly) {
        sxx += (u - mx) * (u - mx);
        sxy += (u - mx) * (v - my);
    }
    if sxx == 0.0 {
        return Err(Error::Regression("abscissae are all identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx
        .iter()
        .zip(&ly)
        .fold(0.0_f64, |acc, (u, v)| acc.max((v - (slope * u + intercept)).abs()));
    Ok((slope, intercept, residual))
}

fn steps_for(horizon: Horizon, t_delta: f64) -> usize {
    match horizon {
        Horizon::Steps(n) => n,
        Horizon::FinalTime(t) => {
            let ratio = t / t_delta;
            (ratio + HORIZON_SLACK * ratio.max(1.0)).floor().max(0.0) as usize
        }
    }
}

/// Run one projective-integration point and measure its errors.
fn run_point(
    spec: &ExperimentSpec,
    eps: f64,
    cfg: SchemeConfig,
    x0_offset: f64,
    sweep_value: f64,
) -> Result<SweepPoint> {
    let sys = MultiscaleSystem::toy(spec.toy, eps);
    let y0 = vec![spec.y0];
    let mut x0 = sys.manifold(&y0)?;
    for xi in &mut x0 {
        *xi += x0_offset;
    }
    let s0 = State::new(x0, y0.clone(), 0.0);
    let n = steps_for(spec.horizon, cfg.t_delta());
    if n == 0 {
        return Err(Error::Spec(format!(
            "horizon admits no macro step at sweep value {sweep_value:.6e}"
        )));
    }

    let traj = integrate_steps(&sys, &s0, &cfg, &Scheme::Projective, n, false)?;

    // running max of burst-start distances over steps 0..n (final state
    // excluded)
    let mut d_series = Vec::with_capacity(n);
    for st in &traj.states[..n] {
        d_series.push(sys.manifold_distance(&st.x, &st.y)?);
    }
    let d_00 = d_series[0];
    let d_n = d_series.iter().cloned().fold(0.0_f64, f64::max);

    let t_end = n as f64 * cfg.t_delta();
    let h_oracle = cfg.dt_macro().min(eps) / ORACLE_STEP_DIVISOR;
    let oracle = integrate_reduced_at(&sys, &y0, h_oracle, &[0.0, t_end])?;
    let diff: Vec<f64> = traj
        .final_state()
        .y
        .iter()
        .zip(&oracle.final_state().y)
        .map(|(a, b)| a - b)
        .collect();
    let e_d = inf_norm(&diff);

    let ledger = spec.ledger();
    let bound_e_d =
        discretization_error_bound(&ledger, &cfg, eps, n, d_n).unwrap_or(f64::NAN);
    let report = check_assumptions(&ledger, &cfg, eps);

    Ok(SweepPoint {
        sweep_value,
        x0_offset,
        d_00,
        d_n,
        n_steps: n,
        cfg,
        eps,
        e_d,
        bound_e_d,
        report,
        in_regression: true,
    })
}

fn wrap_run(sweep_value: f64, r: Result<SweepPoint>) -> Result<SweepPoint> {
    r.map_err(|e| Error::ExperimentRun {
        sweep_value,
        source: Box::new(e),
    })
}

/// Sweep the macro step at a fixed final time; fit `E_d` against the macro
/// step.
pub fn run_dt_scaling(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.kind != ExperimentKind::DtMacroScaling {
        return Err(Error::Spec(format!("expected dt_macro_scaling, got {}", spec.kind)));
    }
    if !matches!(spec.horizon, Horizon::FinalTime(_)) {
        return Err(Error::Spec("dt_macro_scaling requires t_final".into()));
    }
    let mut points = Vec::with_capacity(spec.sweep.len());
    for &dt_macro in &spec.sweep {
        let cfg = SchemeConfig::new(spec.dt_micro, dt_macro, spec.num_micro)?;
        points.push(wrap_run(
            dt_macro,
            run_point(spec, spec.eps, cfg, 0.0, dt_macro),
        )?);
    }
    finish(points)
}

/// Sweep the time-scale parameter at fixed discretization and step count; fit
/// `E_d` against it.
pub fn run_eps_scaling(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.kind != ExperimentKind::EpsScaling {
        return Err(Error::Spec(format!("expected eps_scaling, got {}", spec.kind)));
    }
    let cfg = SchemeConfig::new(spec.dt_micro, spec.dt_macro, spec.num_micro)?;
    let mut points = Vec::with_capacity(spec.sweep.len());
    for &eps in &spec.sweep {
        points.push(wrap_run(eps, run_point(spec, eps, cfg, 0.0, eps))?);
    }
    finish(points)
}

/// Sweep the initial fast offset; fit `E_d` against the measured running
/// maximum of the manifold distance. On-manifold points (offset zero) are
/// excluded from the regression: their abscissa is set by residual drift, not
/// by the swept offset.
pub fn run_dn_scaling(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.kind != ExperimentKind::DnScaling {
        return Err(Error::Spec(format!("expected dn_scaling, got {}", spec.kind)));
    }
    let cfg = SchemeConfig::new(spec.dt_micro, spec.dt_macro, spec.num_micro)?;
    let mut points = Vec::with_capacity(spec.x0_offsets.len());
    for &offset in &spec.x0_offsets {
        let mut p = wrap_run(offset, run_point(spec, spec.eps, cfg, offset, offset))?;
        // regression abscissa is the measured distance
        p.sweep_value = p.d_n;
        p.in_regression = offset > 0.0;
        points.push(p);
    }
    finish(points)
}

/// Dispatch on the spec's kind.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match spec.kind {
        ExperimentKind::DtMacroScaling => run_dt_scaling(spec),
        ExperimentKind::EpsScaling => run_eps_scaling(spec),
        ExperimentKind::DnScaling => run_dn_scaling(spec),
    }
}

fn finish(points: Vec<SweepPoint>) -> Result<ExperimentResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in points.iter().filter(|p| p.in_regression) {
        xs.push(p.sweep_value);
        ys.push(p.e_d);
    }
    let (slope, intercept, residual) = loglog_slope(&xs, &ys)?;
    Ok(ExperimentResult {
        sweep_values: xs,
        errors: ys,
        slope,
        intercept,
        residual,
        points,
    })
}

#[cfg(test)]
mod tests;
