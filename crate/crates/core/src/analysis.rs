//! Constants ledger, validity checks for the discretization parameters, the
//! rigorous a priori error bounds, and measurement of realized errors against
//! reference trajectories.
//!
//! All bound comparisons use the infinity norm: the contraction estimate
//! `|I - (dt/eps) L|` for a diagonal `L` is exactly the infinity operator
//! norm, so the proofs' algebra carries over verbatim.

use std::fmt;

use crate::error::{Error, Result};
use crate::inf_norm;
use crate::integrators::{SchemeConfig, Trajectory};
use crate::system::MultiscaleSystem;

/// Lipschitz and bound constants feeding the error-bound evaluators.
///
/// The constants are user-supplied: they describe the region of state space a
/// run actually visits, which the library cannot certify on its own. Presets
/// carry the published values for the three built-in experiments;
/// [`estimate_constants`] samples finite differences over a box as a
/// non-authoritative helper.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsLedger {
    /// Lipschitz constant of the fast forcing `f`.
    pub l_f: f64,
    /// Lipschitz constant of the slow field `g` (in `|dx| + |dy|`).
    pub l_g: f64,
    /// Bound on `|f|`.
    pub c_f: f64,
    /// Bound on `|g|`.
    pub c_g: f64,
    /// Bound on the curvature of the reduced solution, `sup |d2Y/dt2|`.
    pub c_star: f64,
    /// Largest diagonal entry of the contraction matrix.
    pub lambda_max: f64,
    /// Lipschitz constant of the reduced field; at most `l_g (1 + l_f)`.
    pub l_g_reduced: f64,
    /// Bound on the reduced field; at most `c_g`.
    pub c_g_reduced: f64,
    /// Initial distance of the fast variables from the manifold.
    pub c0x: f64,
    /// Initial slow offset per unit of `eps`: `|y(0) - Y(0)| / eps`.
    pub c0y: f64,
}

/// Slack tolerated when validating the derived-constant inequalities.
const LEDGER_TOL: f64 = 1e-12;

impl ConstantsLedger {
    /// Build a ledger from the primitive constants; the reduced-field
    /// constants default to `l_g (1 + l_f)` and `c_g`, the initial offsets to
    /// zero.
    pub fn new(l_f: f64, l_g: f64, c_f: f64, c_g: f64, c_star: f64, lambda_max: f64) -> Result<Self> {
        for (what, v) in [
            ("l_f", l_f),
            ("l_g", l_g),
            ("c_f", c_f),
            ("c_g", c_g),
            ("c_star", c_star),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    what,
                    value: v,
                    requirement: "finite and >= 0",
                });
            }
        }
        if !(lambda_max >= 1.0) {
            return Err(Error::InvalidParameter {
                what: "lambda_max",
                value: lambda_max,
                requirement: ">= 1 (time normalization)",
            });
        }
        Ok(ConstantsLedger {
            l_f,
            l_g,
            c_f,
            c_g,
            c_star,
            lambda_max,
            l_g_reduced: l_g * (1.0 + l_f),
            c_g_reduced: c_g,
            c0x: 0.0,
            c0y: 0.0,
        })
    }

    /// Override the reduced-field constants; they may not exceed their
    /// defaults.
    pub fn with_reduced_constants(mut self, l_g_reduced: f64, c_g_reduced: f64) -> Result<Self> {
        if l_g_reduced > self.l_g * (1.0 + self.l_f) + LEDGER_TOL {
            return Err(Error::InvalidParameter {
                what: "l_g_reduced",
                value: l_g_reduced,
                requirement: "at most l_g * (1 + l_f)",
            });
        }
        if c_g_reduced > self.c_g + LEDGER_TOL {
            return Err(Error::InvalidParameter {
                what: "c_g_reduced",
                value: c_g_reduced,
                requirement: "at most c_g",
            });
        }
        self.l_g_reduced = l_g_reduced;
        self.c_g_reduced = c_g_reduced;
        Ok(self)
    }

    pub fn with_initial_offsets(mut self, c0x: f64, c0y: f64) -> Self {
        self.c0x = c0x;
        self.c0y = c0y;
        self
    }

    /// Published constants for the macro-step scaling experiment
    /// (`a = 1`, `b = 0.1`, `y` in `(0, 1]`).
    pub fn fig2() -> Self {
        ConstantsLedger::new(0.2, 2.0, 1.0, 1.0, 2.0, 1.0).unwrap()
    }

    /// Published constants for the time-scale scaling experiment
    /// (`a = 0.1`, `b = 1`, `y` near 5).
    pub fn fig3() -> Self {
        ConstantsLedger::new(1.0, 2.0, 1.0, 7.0, 6.0, 1.0).unwrap()
    }

    /// Published constants for the off-manifold scaling experiment
    /// (`a = 1`, `b = 1`, fast variable driven far from the manifold).
    pub fn fig4() -> Self {
        ConstantsLedger::new(1.0, 1.0, 1.0, 290.0, 6.0, 1.0).unwrap()
    }

    /// Look up a preset ledger by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fig2" => Some(Self::fig2()),
            "fig3" => Some(Self::fig3()),
            "fig4" => Some(Self::fig4()),
            _ => None,
        }
    }
}

/// Which contraction branch the micro step falls in: `Small` when
/// `dt <= 2 eps / (lambda + 1)` (contraction factor `1 - dt/eps`), `Large`
/// when `2 eps / (lambda + 1) < dt < 2 eps / lambda` (factor `1 - dt*/eps`
/// with the mirrored step `dt* = 2 eps - lambda dt`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepBranch {
    Small,
    Large,
}

impl fmt::Display for StepBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepBranch::Small => write!(f, "small_dt"),
            StepBranch::Large => write!(f, "large_dt"),
        }
    }
}

/// Classify the micro step and return the effective decay step: `dt` itself
/// on the small branch, `dt* = 2 eps - lambda dt` on the large branch. Errors
/// when `dt` lies outside `(0, 2 eps / lambda)`, where the micro iteration
/// stops contracting. Ties at the branch boundary go to the small branch
/// (both branches coincide there).
pub fn classify_step_branch(dt_micro: f64, eps: f64, lambda: f64) -> Result<(StepBranch, f64)> {
    if !(dt_micro > 0.0) || !(dt_micro < 2.0 * eps / lambda) {
        return Err(Error::OutOfRange {
            what: "dt_micro",
            value: dt_micro,
            range: format!("(0, 2 eps / lambda) = (0, {:.6e})", 2.0 * eps / lambda),
        });
    }
    if dt_micro <= 2.0 * eps / (lambda + 1.0) {
        Ok((StepBranch::Small, dt_micro))
    } else {
        Ok((StepBranch::Large, 2.0 * eps - lambda * dt_micro))
    }
}

/// Outcome of checking the discretization against the validity conditions of
/// the error analysis. Violations are reported, never thrown: the experiments
/// deliberately run outside the valid region.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Micro step resolves the fastest contraction and the macro step exceeds
    /// it: `0 < dt <= 2 eps / lambda < DT`.
    pub step_scales_ok: bool,
    /// Burst duration is short against the reduced Lipschitz time:
    /// `l_g (1 + l_f) M dt <= 1`.
    pub burst_duration_ok: bool,
    /// Contraction keeps the manifold distance bounded over macro steps:
    /// `DT exp(-M dt_eff / eps) < eps / lambda` with the branch-effective
    /// decay step.
    pub contraction_ok: bool,
    pub branch: StepBranch,
    /// Mirrored micro step `2 eps - lambda dt`; only meaningful on the large
    /// branch, degenerate (<= 0) exactly at `dt = 2 eps / lambda`.
    pub dt_star: f64,
    /// One explanatory line per check.
    pub details: Vec<String>,
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "step_scales: {}",
            if self.step_scales_ok { "ok" } else { "violated" }
        )?;
        writeln!(
            f,
            "burst_duration: {}",
            if self.burst_duration_ok { "ok" } else { "violated" }
        )?;
        writeln!(
            f,
            "contraction: {}",
            if self.contraction_ok { "ok" } else { "violated" }
        )?;
        writeln!(f, "branch: {} (dt_star = {:.6e})", self.branch, self.dt_star)?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.step_scales_ok && self.burst_duration_ok && self.contraction_ok
    }

    /// Compact single-line rendering for CSV header comments.
    pub fn one_line(&self) -> String {
        format!(
            "step_scales={} burst_duration={} contraction={} branch={} dt_star={:.17e}",
            self.step_scales_ok, self.burst_duration_ok, self.contraction_ok, self.branch,
            self.dt_star
        )
    }
}

/// Check the discretization parameters against the three validity conditions
/// of the error analysis, reporting each literal inequality.
pub fn check_assumptions(c: &ConstantsLedger, cfg: &SchemeConfig, eps: f64) -> AssumptionReport {
    let lambda = c.lambda_max;
    let dt = cfg.dt_micro();
    let dt_macro = cfg.dt_macro();
    let m = cfg.num_micro() as f64;
    let fast_cap = 2.0 * eps / lambda;

    let step_scales_ok = dt > 0.0 && dt <= fast_cap && fast_cap < dt_macro;
    let burst = c.l_g * (1.0 + c.l_f) * m * dt;
    let burst_duration_ok = burst <= 1.0;

    let boundary = 2.0 * eps / (lambda + 1.0);
    let (branch, dt_star) = if dt <= boundary {
        (StepBranch::Small, 2.0 * eps - lambda * dt)
    } else {
        (StepBranch::Large, 2.0 * eps - lambda * dt)
    };
    let dt_eff = match branch {
        StepBranch::Small => dt,
        StepBranch::Large => dt_star,
    };
    let contraction_lhs = dt_macro * (-m * dt_eff / eps).exp();
    let contraction_ok = dt_eff > 0.0 && contraction_lhs < eps / lambda;

    let mut details = vec![
        format!(
            "step_scales: dt = {dt:.6e}, 2 eps / lambda = {fast_cap:.6e}, DT = {dt_macro:.6e}"
        ),
        format!("burst_duration: l_g (1 + l_f) M dt = {burst:.6e} (must be <= 1)"),
        format!(
            "contraction: DT exp(-M dt_eff / eps) = {contraction_lhs:.6e}, eps / lambda = {:.6e}",
            eps / lambda
        ),
    ];
    if branch == StepBranch::Large && dt_star <= 0.0 {
        details.push(format!(
            "branch degenerate: dt = {dt:.6e} reaches 2 eps / lambda, dt_star = {dt_star:.6e} is not positive"
        ));
    }

    AssumptionReport {
        step_scales_ok,
        burst_duration_ok,
        contraction_ok,
        branch,
        dt_star,
        details,
    }
}

/// Bound on the manifold distance after `m` micro steps of one burst, given
/// the distance `d0` at the burst start:
///
/// ```text
/// small branch:  (1 - dt/eps)^m  d0 + eps l_f c_g
/// large branch:  (1 - dt*/eps)^m d0 + (dt/dt*) eps l_f c_g
/// ```
pub fn burst_distance_bound(
    c: &ConstantsLedger,
    eps: f64,
    dt_micro: f64,
    m: usize,
    d0: f64,
) -> Result<f64> {
    let (branch, dt_eff) = classify_step_branch(dt_micro, eps, c.lambda_max)?;
    let decay = (1.0 - dt_eff / eps).powi(m as i32);
    let drift_factor = match branch {
        StepBranch::Small => 1.0,
        StepBranch::Large => dt_micro / dt_eff,
    };
    Ok(decay * d0 + drift_factor * eps * c.l_f * c.c_g)
}

/// Uniform bound on the manifold distance at burst starts over an entire run,
/// given the initial distance `d00`:
///
/// ```text
/// small branch:  d00 + eps l_f c_g (1 + lambda) DT / (eps - DT lambda exp(-M dt /eps))
/// large branch:  d00 + eps l_f c_g (1 + lambda dt/dt*) DT / (eps - DT lambda exp(-M dt*/eps))
/// ```
///
/// Fails with a bound-inapplicable error when the denominator is not
/// positive, i.e. when the contraction condition over macro steps is
/// violated.
pub fn macro_distance_bound(
    c: &ConstantsLedger,
    cfg: &SchemeConfig,
    eps: f64,
    d00: f64,
) -> Result<f64> {
    let (branch, dt_eff) = classify_step_branch(cfg.dt_micro(), eps, c.lambda_max)?;
    let lambda = c.lambda_max;
    let m = cfg.num_micro() as f64;
    let dt_macro = cfg.dt_macro();
    let denom = eps - dt_macro * lambda * (-m * dt_eff / eps).exp();
    if denom <= 0.0 {
        return Err(Error::BoundInapplicable(format!(
            "contraction over macro steps fails: eps - DT lambda exp(-M dt_eff/eps) = {denom:.6e} <= 0"
        )));
    }
    let rate_factor = match branch {
        StepBranch::Small => 1.0 + lambda,
        StepBranch::Large => 1.0 + lambda * cfg.dt_micro() / dt_eff,
    };
    Ok(d00 + eps * c.l_f * c.c_g * rate_factor * dt_macro / denom)
}

/// Bound on the gap between the slow solution of the full system and the
/// reduced solution at time `t`:
///
/// ```text
/// C1 * eps,   C1 = max(c0y eps, l_f l_g c_g t, l_g c0x) * exp(l_g (1 + l_f) t)
/// ```
pub fn reduction_error_bound(c: &ConstantsLedger, eps: f64, t: f64) -> f64 {
    let c1 = (c.c0y * eps)
        .max(c.l_f * c.l_g * c.c_g * t)
        .max(c.l_g * c.c0x)
        * (c.l_g * (1.0 + c.l_f) * t).exp();
    c1 * eps
}

/// Bound on the gap between the scheme's slow iterate after `n` macro steps
/// and the exact reduced solution, given the maximal manifold distance `dn`
/// observed at burst starts:
///
/// ```text
/// 3 (exp(n t_delta L_G) / L_G) pref *
///     { c_star t_delta
///       + l_g (eps/t_delta + l_g (1 + l_f) eps + exp(-M dt_eff/eps)) dn
///       + l_g l_f c_g eps }
/// ```
///
/// with `pref = 1` on the small branch and `dt/dt*` on the large branch.
pub fn discretization_error_bound(
    c: &ConstantsLedger,
    cfg: &SchemeConfig,
    eps: f64,
    n: usize,
    dn: f64,
) -> Result<f64> {
    let (branch, dt_eff) = classify_step_branch(cfg.dt_micro(), eps, c.lambda_max)?;
    let td = cfg.t_delta();
    let m = cfg.num_micro() as f64;
    let l_g_red = c.l_g_reduced;
    let pref = match branch {
        StepBranch::Small => 1.0,
        StepBranch::Large => cfg.dt_micro() / dt_eff,
    };
    let envelope = 3.0 * (n as f64 * td * l_g_red).exp() / l_g_red;
    let dn_coeff = eps / td + c.l_g * (1.0 + c.l_f) * eps + (-m * dt_eff / eps).exp();
    let brace = c.c_star * td + c.l_g * dn_coeff * dn + c.l_g * c.l_f * c.c_g * eps;
    Ok(envelope * pref * brace)
}

/// Bound on the total error of the scheme against the full system after `n`
/// macro steps: the reduction bound at `t = n t_delta` plus the
/// discretization bound.
pub fn total_error_bound(
    c: &ConstantsLedger,
    cfg: &SchemeConfig,
    eps: f64,
    n: usize,
    dn: f64,
) -> Result<f64> {
    let t = n as f64 * cfg.t_delta();
    Ok(reduction_error_bound(c, eps, t) + discretization_error_bound(c, cfg, eps, n, dn)?)
}

/// Kind of realized-error series produced by [`measure_errors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Scheme against the full system: `|y_full(t_n) - y_n|`.
    Total,
    /// Full system against the reduced solution: `|y_full(t_n) - Y(t_n)|`.
    ReductionGap,
    /// Scheme against the reduced solution: `|y_n - Y(t_n)|`.
    Discretization,
    /// Manifold distance of the scheme state at each burst start.
    BurstStartDistance,
    /// Running maximum of the burst-start distances over preceding steps.
    RunningMaxDistance,
}

/// One realized-error series over the macro timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: ErrorKind,
}

/// The five series measured from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredErrors {
    pub total: ErrorSeries,
    pub reduction_gap: ErrorSeries,
    pub discretization: ErrorSeries,
    pub burst_start_distance: ErrorSeries,
    pub running_max_distance: ErrorSeries,
}

/// Measure the realized errors of a scheme trajectory against a full-system
/// oracle and a reduced oracle, in the infinity norm on the slow components.
///
/// Both oracles must cover every macro timestamp within their own step
/// (nearest-sample matching; oracles produced by the `_at` integrators carry
/// zero matching error by construction). The running-max series at index `n`
/// maximizes the burst-start distances over steps `0..n`, so its first entry
/// is zero.
pub fn measure_errors(
    sys: &MultiscaleSystem,
    traj: &Trajectory,
    oracle_full: &Trajectory,
    oracle_reduced: &Trajectory,
) -> Result<MeasuredErrors> {
    let tol_full = oracle_full.config.matching_tolerance();
    let tol_reduced = oracle_reduced.config.matching_tolerance();
    let n_states = traj.states.len();

    let mut times = Vec::with_capacity(n_states);
    let mut total = Vec::with_capacity(n_states);
    let mut reduction = Vec::with_capacity(n_states);
    let mut discretization = Vec::with_capacity(n_states);
    let mut d_start = Vec::with_capacity(n_states);
    let mut d_running = Vec::with_capacity(n_states);

    let mut running: f64 = 0.0;
    for state in &traj.states {
        let i_full = oracle_full.nearest_index(state.t, tol_full)?;
        let i_red = oracle_reduced.nearest_index(state.t, tol_reduced)?;
        let y_full = &oracle_full.states[i_full].y;
        let y_red = &oracle_reduced.states[i_red].y;

        let diff_total: Vec<f64> = state.y.iter().zip(y_full).map(|(a, b)| a - b).collect();
        let diff_red: Vec<f64> = state.y.iter().zip(y_red).map(|(a, b)| a - b).collect();
        let diff_gap: Vec<f64> = y_full.iter().zip(y_red).map(|(a, b)| a - b).collect();

        times.push(state.t);
        total.push(inf_norm(&diff_total));
        discretization.push(inf_norm(&diff_red));
        reduction.push(inf_norm(&diff_gap));

        d_running.push(running);
        let d = sys.manifold_distance(&state.x, &state.y)?;
        d_start.push(d);
        running = running.max(d);
    }

    let series = |values: Vec<f64>, kind| ErrorSeries {
        times: times.clone(),
        values,
        kind,
    };
    Ok(MeasuredErrors {
        total: series(total, ErrorKind::Total),
        reduction_gap: series(reduction, ErrorKind::ReductionGap),
        discretization: series(discretization, ErrorKind::Discretization),
        burst_start_distance: series(d_start, ErrorKind::BurstStartDistance),
        running_max_distance: series(d_running, ErrorKind::RunningMaxDistance),
    })
}

/// Sample finite differences of `f`, `g` and the reduced field over an
/// axis-aligned box to estimate the ledger constants. A helper for exploring
/// new systems; it never overrides preset values and carries no rigor.
pub fn estimate_constants(
    sys: &MultiscaleSystem,
    x_box: &[(f64, f64)],
    y_box: &[(f64, f64)],
    points_per_axis: usize,
) -> Result<ConstantsLedger> {
    let m = sys.fast_dim();
    let n = sys.slow_dim();
    if x_box.len() != m {
        return Err(Error::DimensionMismatch {
            what: "x_box",
            expected: m,
            actual: x_box.len(),
        });
    }
    if y_box.len() != n {
        return Err(Error::DimensionMismatch {
            what: "y_box",
            expected: n,
            actual: y_box.len(),
        });
    }
    let k = points_per_axis.max(2);

    let grid = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    let mut y_points: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for axis in 0..n {
        let mut next = Vec::new();
        for base in &y_points {
            for i in 0..k {
                let mut p = base.clone();
                p[axis] = grid(y_box[axis].0, y_box[axis].1, i);
                next.push(p);
            }
        }
        y_points = next;
    }
    let mut x_points: Vec<Vec<f64>> = vec![vec![0.0; m]];
    for axis in 0..m {
        let mut next = Vec::new();
        for base in &x_points {
            for i in 0..k {
                let mut p = base.clone();
                p[axis] = grid(x_box[axis].0, x_box[axis].1, i);
                next.push(p);
            }
        }
        x_points = next;
    }

    let h_of = |(lo, hi): (f64, f64)| ((hi - lo).abs() * 1e-6).max(1e-9);

    let mut l_f: f64 = 0.0;
    let mut c_f: f64 = 0.0;
    let mut l_g: f64 = 0.0;
    let mut c_g: f64 = 0.0;
    let mut c_star: f64 = 0.0;

    for y in &y_points {
        let fy = sys.manifold(y)?; // f scaled by 1/lambda; rescale below
        let f_raw: Vec<f64> = fy
            .iter()
            .zip(sys.lambda_diag())
            .map(|(v, l)| v * l)
            .collect();
        c_f = c_f.max(inf_norm(&f_raw));

        // infinity-operator-norm of the Jacobian of f: max row sum
        let mut row_sums = vec![0.0_f64; m];
        for j in 0..n {
            let h = h_of(y_box[j]);
            let mut yp = y.clone();
            yp[j] += h;
            let fp = sys.manifold(&yp)?;
            for i in 0..m {
                row_sums[i] += ((fp[i] - fy[i]) * sys.lambda_diag()[i] / h).abs();
            }
        }
        l_f = l_f.max(inf_norm(&row_sums));

        // reduced field magnitude and curvature |DG . G|
        let g_red = sys.reduced_rhs(y)?;
        let mut dg_g = vec![0.0_f64; n];
        for j in 0..n {
            let h = h_of(y_box[j]);
            let mut yp = y.clone();
            yp[j] += h;
            let gp = sys.reduced_rhs(&yp)?;
            for i in 0..n {
                dg_g[i] += (gp[i] - g_red[i]) / h * g_red[j];
            }
        }
        c_star = c_star.max(inf_norm(&dg_g));

        for x in &x_points {
            let gxy = sys.slow_rhs(x, y)?;
            c_g = c_g.max(inf_norm(&gxy));

            let mut rows = vec![0.0_f64; n];
            for j in 0..m {
                let h = h_of(x_box[j]);
                let mut xp = x.clone();
                xp[j] += h;
                let gp = sys.slow_rhs(&xp, y)?;
                for i in 0..n {
                    rows[i] += ((gp[i] - gxy[i]) / h).abs();
                }
            }
            let mut rows_y = vec![0.0_f64; n];
            for j in 0..n {
                let h = h_of(y_box[j]);
                let mut yp = y.clone();
                yp[j] += h;
                let gp = sys.slow_rhs(x, &yp)?;
                for i in 0..n {
                    rows_y[i] += ((gp[i] - gxy[i]) / h).abs();
                }
            }
            l_g = l_g.max(inf_norm(&rows)).max(inf_norm(&rows_y));
        }
    }

    ConstantsLedger::new(l_f, l_g, c_f, c_g, c_star, sys.lambda_max())
}

#[cfg(test)]
mod tests;
