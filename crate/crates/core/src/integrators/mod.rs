//! The coarse time-stepping schemes: micro steps, macro steps for projective
//! integration and the two HMM variants, and the run drivers.
//!
//! Every scheme is built from the same explicit micro update
//!
//! ```text
//! x' = x - (dt/eps) * (L x - f(y))
//! y' = y + dt * g(x, y)
//! ```
//!
//! where both components read the incoming state (Jacobi update, no
//! Gauss-Seidel). A burst of `M` micro steps is followed by one macro update;
//! the schemes differ in where the macro update starts and how it combines the
//! burst samples.

mod oracle;

pub use oracle::{
    integrate_reduced, integrate_reduced_at, integrate_reference, integrate_reference_at,
    ReducedMethod,
};

use crate::error::{Error, Result};
use crate::system::{MultiscaleSystem, State};

/// Relative slack when converting a time horizon into a step count, so that
/// `T = n * period` computed in floating point still yields `n` steps.
const HORIZON_SLACK: f64 = 1e-9;

/// Discretization parameters: micro step `dt`, macro step `DT`, burst length
/// `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    dt_micro: f64,
    dt_macro: f64,
    num_micro: usize,
}

impl SchemeConfig {
    pub fn new(dt_micro: f64, dt_macro: f64, num_micro: usize) -> Result<Self> {
        if !(dt_micro > 0.0) || !dt_micro.is_finite() {
            return Err(Error::InvalidParameter {
                what: "dt_micro",
                value: dt_micro,
                requirement: "finite and > 0",
            });
        }
        if !(dt_macro > 0.0) || !dt_macro.is_finite() {
            return Err(Error::InvalidParameter {
                what: "dt_macro",
                value: dt_macro,
                requirement: "finite and > 0",
            });
        }
        Ok(SchemeConfig {
            dt_micro,
            dt_macro,
            num_micro,
        })
    }

    pub fn dt_micro(&self) -> f64 {
        self.dt_micro
    }

    pub fn dt_macro(&self) -> f64 {
        self.dt_macro
    }

    pub fn num_micro(&self) -> usize {
        self.num_micro
    }

    /// Total time advanced by one projective-integration iteration,
    /// `DT + M * dt`.
    pub fn t_delta(&self) -> f64 {
        self.dt_macro + self.num_micro as f64 * self.dt_micro
    }

    /// Mirrored micro step `2 eps - lambda * dt`, which governs the
    /// contraction rate when `dt` exceeds `2 eps / (lambda + 1)`.
    pub fn dt_star(&self, eps: f64, lambda: f64) -> f64 {
        2.0 * eps - lambda * self.dt_micro
    }
}

/// Convex weights combining the burst samples into a macro-step vector-field
/// estimate. Constructed weights always satisfy the normalization constraint
/// `sum = 1` within 1e-15.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates the normalization constraint with compensated summation.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let sum = crate::neumaier_sum(&w);
        if (sum - 1.0).abs() > 1e-15 {
            return Err(Error::WeightNormalization { sum });
        }
        Ok(WeightVector(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The projective-integration weights: `dt / t_delta` on every interior burst
/// sample and `DT / t_delta` on the last one.
///
/// The last weight is formed as `1 - M * (dt / t_delta)`, which equals
/// `DT / t_delta` exactly in real arithmetic and pins the sum to one within a
/// rounding error.
pub fn pi_weights(cfg: &SchemeConfig) -> WeightVector {
    let m = cfg.num_micro;
    let td = cfg.t_delta();
    let w_interior = cfg.dt_micro / td;
    let mut w = vec![w_interior; m + 1];
    w[m] = 1.0 - m as f64 * w_interior;
    WeightVector(w)
}

/// Indicator weights on the last burst sample: the natural choice when the
/// fast dynamics has settled by the end of the burst.
pub fn endpoint_weights(num_micro: usize) -> WeightVector {
    let mut w = vec![0.0; num_micro + 1];
    w[num_micro] = 1.0;
    WeightVector(w)
}

/// Tag identifying how a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Reference,
    Reduced,
    Projective,
    SeamlessHmm,
    Hmm,
}

/// Discretization record attached to a trajectory: scheme parameters, or the
/// fixed step of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryConfig {
    Scheme(SchemeConfig),
    FixedStep(f64),
}

impl TrajectoryConfig {
    /// Step used for nearest-sample matching against this trajectory.
    pub fn matching_tolerance(&self) -> f64 {
        match self {
            TrajectoryConfig::Scheme(cfg) => cfg.dt_micro,
            TrajectoryConfig::FixedStep(h) => *h,
        }
    }
}

/// The `M + 1` states of one micro burst.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroBurst {
    pub states: Vec<State>,
}

/// A time-stamped sequence of states produced by one integrator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub kind: SchemeKind,
    pub config: TrajectoryConfig,
    /// One burst per macro step when micro-state retention was requested.
    pub micro_bursts: Option<Vec<MicroBurst>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }

    /// Check that timestamps are strictly increasing.
    pub fn validate(&self) -> Result<()> {
        for w in self.states.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidParameter {
                    what: "trajectory timestamps",
                    value: w[1].t,
                    requirement: "strictly increasing",
                });
            }
        }
        Ok(())
    }

    /// Index of the stored state nearest to `t`, if within `tol`.
    pub fn nearest_index(&self, t: f64, tol: f64) -> Result<usize> {
        let times: Vec<f64> = self.times().collect();
        let idx = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                // pick the closer of the two neighbours
                if i == 0 {
                    0
                } else if i >= times.len() {
                    times.len() - 1
                } else if (times[i] - t).abs() < (t - times[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        };
        let gap = (times[idx] - t).abs();
        if gap > tol {
            return Err(Error::UncoveredTimestamp {
                t,
                nearest: times[idx],
                tol,
            });
        }
        Ok(idx)
    }
}

/// Scheme selector for the run driver. The HMM variants carry their weights.
#[derive(Debug, Clone)]
pub enum Scheme {
    Projective,
    SeamlessHmm(WeightVector),
    Hmm(WeightVector),
}

impl Scheme {
    fn kind(&self) -> SchemeKind {
        match self {
            Scheme::Projective => SchemeKind::Projective,
            Scheme::SeamlessHmm(_) => SchemeKind::SeamlessHmm,
            Scheme::Hmm(_) => SchemeKind::Hmm,
        }
    }

    /// Physical time advanced per iteration. PI advances `t_delta`; the HMM
    /// variants advance `DT` only (the burst is an auxiliary estimator).
    pub fn period(&self, cfg: &SchemeConfig) -> f64 {
        match self {
            Scheme::Projective => cfg.t_delta(),
            Scheme::SeamlessHmm(_) | Scheme::Hmm(_) => cfg.dt_macro,
        }
    }
}

fn check_component(v: &[f64], name: &str, t: f64, micro_index: Option<usize>) -> Result<()> {
    for (i, &vi) in v.iter().enumerate() {
        if !vi.is_finite() {
            return Err(Error::NonFinite {
                component: format!("{name}[{i}]"),
                t,
                micro_index,
            });
        }
    }
    Ok(())
}

/// One explicit micro step of size `dt_micro` from `s`. Both components are
/// evaluated from the incoming state.
pub fn micro_step(sys: &MultiscaleSystem, s: &State, dt_micro: f64) -> Result<State> {
    if !(dt_micro > 0.0) {
        return Err(Error::InvalidParameter {
            what: "dt_micro",
            value: dt_micro,
            requirement: "> 0",
        });
    }
    let eps = sys.epsilon();
    let lam = sys.lambda_diag();
    let ratio = dt_micro / eps;
    let mut fy = vec![0.0; sys.fast_dim()];
    sys.fast_forcing_into(&s.y, &mut fy);
    // x' = x - (dt/eps)*(L x - f(y)); the ratio is formed first so that
    // dt == eps gives an exact factor of one
    let x_next: Vec<f64> = s
        .x
        .iter()
        .zip(lam)
        .zip(&fy)
        .map(|((&xi, &li), &fi)| xi - ratio * (li * xi - fi))
        .collect();
    let mut gy = vec![0.0; sys.slow_dim()];
    sys.slow_field_into(&s.x, &s.y, &mut gy);
    let y_next: Vec<f64> = s.y.iter().zip(&gy).map(|(&yi, &gi)| yi + dt_micro * gi).collect();
    let t_next = s.t + dt_micro;
    check_component(&x_next, "x", t_next, None)?;
    check_component(&y_next, "y", t_next, None)?;
    Ok(State::new(x_next, y_next, t_next))
}

/// The `M + 1` states obtained by iterating [`micro_step`] from `s`.
pub fn micro_burst(sys: &MultiscaleSystem, s: &State, cfg: &SchemeConfig) -> Result<MicroBurst> {
    let mut states = Vec::with_capacity(cfg.num_micro + 1);
    states.push(s.clone());
    for m in 0..cfg.num_micro {
        let next = micro_step(sys, states.last().unwrap(), cfg.dt_micro).map_err(|e| match e {
            Error::NonFinite { component, t, .. } => Error::NonFinite {
                component,
                t,
                micro_index: Some(m),
            },
            other => other,
        })?;
        states.push(next);
    }
    Ok(MicroBurst { states })
}

fn macro_divergence(x: &[f64], y: &[f64], last_finite: &State) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::MacroStepDiverged {
                component: format!("x[{i}]"),
                last_finite: last_finite.clone(),
            });
        }
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::MacroStepDiverged {
                component: format!("y[{i}]"),
                last_finite: last_finite.clone(),
            });
        }
    }
    Ok(())
}

fn pi_macro_step_inner(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
    want_burst: bool,
) -> Result<(State, Option<MicroBurst>)> {
    let burst = micro_burst(sys, s, cfg)?;
    let last = burst.states.last().unwrap();
    let eps = sys.epsilon();
    let lam = sys.lambda_diag();
    let ratio = cfg.dt_macro / eps;
    let mut fy = vec![0.0; sys.fast_dim()];
    sys.fast_forcing_into(&last.y, &mut fy);
    let x_next: Vec<f64> = last
        .x
        .iter()
        .zip(lam)
        .zip(&fy)
        .map(|((&xi, &li), &fi)| xi - ratio * (li * xi - fi))
        .collect();
    let mut gy = vec![0.0; sys.slow_dim()];
    sys.slow_field_into(&last.x, &last.y, &mut gy);
    let y_next: Vec<f64> = last
        .y
        .iter()
        .zip(&gy)
        .map(|(&yi, &gi)| yi + cfg.dt_macro * gi)
        .collect();
    macro_divergence(&x_next, &y_next, last)?;
    let next = State::new(x_next, y_next, s.t + cfg.t_delta());
    Ok((next, if want_burst { Some(burst) } else { None }))
}

/// One projective-integration iteration: a micro burst, then an extrapolation
/// of both variable groups from the burst endpoint over `DT`. Advances time by
/// `t_delta`.
pub fn pi_macro_step(sys: &MultiscaleSystem, s: &State, cfg: &SchemeConfig) -> Result<State> {
    pi_macro_step_inner(sys, s, cfg, false).map(|(s, _)| s)
}

/// Shared kernel of the weighted macro updates: from the burst start `s`,
///
/// ```text
/// x' = x - (coeff/eps) * sum_m W_m (L x_m - f(y_m))
/// y' = y + coeff * sum_m W_m g(x_m, y_m)
/// ```
///
/// with `coeff` the extrapolation span, accumulating the weighted residuals on
/// the fly.
fn weighted_macro_from_start(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
    w: &WeightVector,
    coeff: f64,
    advance: f64,
    want_burst: bool,
) -> Result<(State, Option<MicroBurst>)> {
    if w.len() != cfg.num_micro + 1 {
        return Err(Error::WeightLength {
            expected: cfg.num_micro + 1,
            actual: w.len(),
        });
    }
    let eps = sys.epsilon();
    let lam = sys.lambda_diag();
    let m_fast = sys.fast_dim();
    let n_slow = sys.slow_dim();
    let weights = w.as_slice();

    let mut acc_residual = vec![0.0; m_fast]; // sum_m W_m (L x_m - f(y_m))
    let mut acc_field = vec![0.0; n_slow]; // sum_m W_m g(x_m, y_m)
    let mut fy = vec![0.0; m_fast];
    let mut gy = vec![0.0; n_slow];

    let mut burst = Vec::with_capacity(if want_burst { cfg.num_micro + 1 } else { 0 });
    let mut cur = s.clone();
    for m in 0..=cfg.num_micro {
        sys.fast_forcing_into(&cur.y, &mut fy);
        for i in 0..m_fast {
            acc_residual[i] += weights[m] * (lam[i] * cur.x[i] - fy[i]);
        }
        sys.slow_field_into(&cur.x, &cur.y, &mut gy);
        for j in 0..n_slow {
            acc_field[j] += weights[m] * gy[j];
        }
        if want_burst {
            burst.push(cur.clone());
        }
        if m < cfg.num_micro {
            cur = micro_step(sys, &cur, cfg.dt_micro).map_err(|e| match e {
                Error::NonFinite { component, t, .. } => Error::NonFinite {
                    component,
                    t,
                    micro_index: Some(m),
                },
                other => other,
            })?;
        }
    }

    let ratio = coeff / eps;
    let x_next: Vec<f64> = s
        .x
        .iter()
        .zip(&acc_residual)
        .map(|(&xi, &ri)| xi - ratio * ri)
        .collect();
    let y_next: Vec<f64> = s
        .y
        .iter()
        .zip(&acc_field)
        .map(|(&yi, &gi)| yi + coeff * gi)
        .collect();
    macro_divergence(&x_next, &y_next, &cur)?;
    let next = State::new(x_next, y_next, s.t + advance);
    Ok((next, if want_burst { Some(MicroBurst { states: burst }) } else { None }))
}

/// The weighted reformulation of [`pi_macro_step`]: identical output up to
/// rounding, but computed from the burst start with the PI weights and an
/// extrapolation span of `t_delta`. Kept as a distinct arithmetic route so the
/// two formulations can cross-check each other.
pub fn pi_macro_step_weighted(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
) -> Result<State> {
    let w = pi_weights(cfg);
    let td = cfg.t_delta();
    weighted_macro_from_start(sys, s, cfg, &w, td, td, false).map(|(s, _)| s)
}

/// One seamless-HMM iteration: micro burst from `s`, weighted macro update
/// from the burst start over `DT`. Advances time by `DT`; the burst is an
/// auxiliary estimator, not a time advance.
pub fn shmm_macro_step(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
    w: &WeightVector,
) -> Result<State> {
    weighted_macro_from_start(sys, s, cfg, w, cfg.dt_macro, cfg.dt_macro, false).map(|(s, _)| s)
}

fn hmm_macro_step_inner(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
    w: &WeightVector,
    want_burst: bool,
) -> Result<(State, Option<MicroBurst>)> {
    if w.len() != cfg.num_micro + 1 {
        return Err(Error::WeightLength {
            expected: cfg.num_micro + 1,
            actual: w.len(),
        });
    }
    let eps = sys.epsilon();
    let lam = sys.lambda_diag();
    let m_fast = sys.fast_dim();
    let n_slow = sys.slow_dim();
    let weights = w.as_slice();
    let ratio = cfg.dt_micro / eps;

    // frozen slow variables: f(y^n) is constant over the burst
    let mut fy = vec![0.0; m_fast];
    sys.fast_forcing_into(&s.y, &mut fy);

    let mut acc_field = vec![0.0; n_slow]; // sum_m W_m g(x_m, y^n)
    let mut gy = vec![0.0; n_slow];
    let mut x = s.x.clone();
    let mut burst = Vec::with_capacity(if want_burst { cfg.num_micro + 1 } else { 0 });
    for m in 0..=cfg.num_micro {
        sys.slow_field_into(&x, &s.y, &mut gy);
        for j in 0..n_slow {
            acc_field[j] += weights[m] * gy[j];
        }
        if want_burst {
            burst.push(State::new(
                x.clone(),
                s.y.clone(),
                s.t + m as f64 * cfg.dt_micro,
            ));
        }
        if m < cfg.num_micro {
            for i in 0..m_fast {
                x[i] -= ratio * (lam[i] * x[i] - fy[i]);
            }
            check_component(&x, "x", s.t + (m + 1) as f64 * cfg.dt_micro, Some(m))?;
        }
    }

    let y_next: Vec<f64> = s
        .y
        .iter()
        .zip(&acc_field)
        .map(|(&yi, &gi)| yi + cfg.dt_macro * gi)
        .collect();
    let last_finite = State::new(x.clone(), s.y.clone(), s.t);
    macro_divergence(&x, &y_next, &last_finite)?;
    let next = State::new(x, y_next, s.t + cfg.dt_macro);
    Ok((next, if want_burst { Some(MicroBurst { states: burst }) } else { None }))
}

/// One HMM iteration with the slow variables frozen during the burst: the fast
/// recursion relaxes against `f(y^n)`, the slow update uses the weighted
/// average of `g(x_m, y^n)`, and the fast variables are handed over at the
/// burst endpoint. Advances time by `DT`.
pub fn hmm_macro_step(
    sys: &MultiscaleSystem,
    s: &State,
    cfg: &SchemeConfig,
    w: &WeightVector,
) -> Result<State> {
    hmm_macro_step_inner(sys, s, cfg, w, false).map(|(s, _)| s)
}

/// Drive `scheme` for `n_steps` macro iterations from `s0`.
///
/// Macro timestamps accumulate one period per iteration. With `record_micro`
/// the per-step bursts are retained on the trajectory (one per macro step);
/// otherwise memory stays bounded by the macro states alone. On divergence the
/// trajectory accumulated so far is carried inside the error.
pub fn integrate_steps(
    sys: &MultiscaleSystem,
    s0: &State,
    cfg: &SchemeConfig,
    scheme: &Scheme,
    n_steps: usize,
    record_micro: bool,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(s0.clone());
    let mut bursts = if record_micro { Some(Vec::with_capacity(n_steps)) } else { None };
    for k in 0..n_steps {
        let cur = states.last().unwrap();
        let step = match scheme {
            Scheme::Projective => pi_macro_step_inner(sys, cur, cfg, record_micro),
            Scheme::SeamlessHmm(w) => weighted_macro_from_start(
                sys,
                cur,
                cfg,
                w,
                cfg.dt_macro,
                cfg.dt_macro,
                record_micro,
            ),
            Scheme::Hmm(w) => hmm_macro_step_inner(sys, cur, cfg, w, record_micro),
        };
        match step {
            Ok((next, burst)) => {
                if let (Some(bs), Some(b)) = (bursts.as_mut(), burst) {
                    bs.push(b);
                }
                states.push(next);
            }
            Err(e) => {
                let partial = Trajectory {
                    states,
                    kind: scheme.kind(),
                    config: TrajectoryConfig::Scheme(*cfg),
                    micro_bursts: bursts,
                };
                return Err(Error::Diverged {
                    macro_index: k,
                    reason: e.to_string(),
                    partial: Box::new(partial),
                });
            }
        }
    }
    Ok(Trajectory {
        states,
        kind: scheme.kind(),
        config: TrajectoryConfig::Scheme(*cfg),
        micro_bursts: bursts,
    })
}

/// Drive `scheme` from `s0` until the largest step count whose end time stays
/// within `t_final` (plus rounding slack).
pub fn integrate_multiscale(
    sys: &MultiscaleSystem,
    s0: &State,
    cfg: &SchemeConfig,
    scheme: &Scheme,
    t_final: f64,
    record_micro: bool,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            what: "t_final",
            value: t_final,
            requirement: "finite and > 0",
        });
    }
    let period = scheme.period(cfg);
    let ratio = (t_final - s0.t) / period;
    let n_steps = (ratio + HORIZON_SLACK * ratio.max(1.0)).floor().max(0.0) as usize;
    integrate_steps(sys, s0, cfg, scheme, n_steps, record_micro)
}
