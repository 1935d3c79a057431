//! Reference integrations used as oracles: a classical 4th-order one-step
//! method on the full system, and first-order / 4th-order integrations of the
//! reduced dynamics.
//!
//! Every high-accuracy run re-integrates with halved steps and fails loudly if
//! the two endpoints disagree, so a stale oracle can never silently pollute an
//! error measurement.

use crate::error::{Error, Result};
use crate::system::{MultiscaleSystem, State};

use super::{SchemeKind, Trajectory, TrajectoryConfig};

/// Mixed absolute/relative tolerance of the step-halving self-check for the
/// full-system reference.
const REFERENCE_CHECK_TOL: f64 = 1e-9;
/// Self-check tolerance for the 4th-order reduced oracle.
const REDUCED_CHECK_TOL: f64 = 1e-10;
/// Hard cap on stored states for the step-recording entry points.
const RECORD_CAP: usize = 2_000_000;

/// Order selector for [`integrate_reduced`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedMethod {
    /// Forward Euler; reproduces the first-order coarse recursion exactly.
    Euler1,
    /// Classical 4th-order steps with a step-halving self-check; the oracle
    /// for the exact reduced solution.
    Ref4,
}

/// Scaled infinity distance `max_i |a_i - b_i| / (1 + |b_i|)`.
fn scaled_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (&ai, &bi)| acc.max((ai - bi).abs() / (1.0 + bi.abs())))
}

/// Classical 4th-order step on an autonomous right-hand side, in place.
struct Rk4<F> {
    rhs: F,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<F: FnMut(&[f64], &mut [f64])> Rk4<F> {
    fn new(dim: usize, rhs: F) -> Self {
        Rk4 {
            rhs,
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, state: &mut [f64], h: f64) {
        let n = state.len();
        (self.rhs)(state, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k1[i];
        }
        (self.rhs)(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k2[i];
        }
        (self.rhs)(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + h * self.k3[i];
        }
        (self.rhs)(&self.tmp, &mut self.k4);
        for i in 0..n {
            state[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_finite(state: &[f64], t: f64) -> Result<()> {
    for (i, &v) in state.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                component: format!("state[{i}]"),
                t,
                micro_index: None,
            });
        }
    }
    Ok(())
}

/// Integrate `rhs` across the gaps between consecutive `times`, snapping the
/// step inside each gap to `gap / ceil(gap / h_max)` so every requested time
/// is hit exactly. Returns the states at the requested times (the first entry
/// of `times` must be the initial time).
fn rk4_at_times(
    dim: usize,
    mut rhs: impl FnMut(&[f64], &mut [f64]),
    initial: &[f64],
    times: &[f64],
    h_max: f64,
    halved: bool,
) -> Result<Vec<Vec<f64>>> {
    let mut stepper = Rk4::new(dim, &mut rhs);
    let mut state = initial.to_vec();
    let mut out = Vec::with_capacity(times.len());
    out.push(state.clone());
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        if !(gap > 0.0) {
            return Err(Error::InvalidParameter {
                what: "sample times",
                value: w[1],
                requirement: "strictly increasing",
            });
        }
        let mut k = (gap / h_max).ceil() as usize;
        k = k.max(1);
        if halved {
            k *= 2;
        }
        let h = gap / k as f64;
        for _ in 0..k {
            stepper.step(&mut state, h);
        }
        check_finite(&state, w[1])?;
        out.push(state.clone());
    }
    Ok(out)
}

fn full_rhs<'a>(sys: &'a MultiscaleSystem, fbuf: &'a mut [f64]) -> impl FnMut(&[f64], &mut [f64]) + 'a {
    let m = sys.fast_dim();
    let n = sys.slow_dim();
    let eps = sys.epsilon();
    move |state: &[f64], out: &mut [f64]| {
        let (x, y) = state.split_at(m);
        sys.fast_forcing_into(y, fbuf);
        for i in 0..m {
            out[i] = (fbuf[i] - sys.lambda_diag()[i] * x[i]) / eps;
        }
        sys.slow_field_into(x, y, &mut out[m..m + n]);
    }
}

fn pack(s: &State) -> Vec<f64> {
    let mut packed = s.x.clone();
    packed.extend_from_slice(&s.y);
    packed
}

fn unpack(sys: &MultiscaleSystem, packed: &[f64], t: f64) -> State {
    let m = sys.fast_dim();
    State::new(packed[..m].to_vec(), packed[m..].to_vec(), t)
}

fn validate_h_ref(sys: &MultiscaleSystem, h_ref: f64) -> Result<()> {
    let cap = sys.epsilon() / 20.0;
    if !(h_ref > 0.0) || h_ref > cap {
        return Err(Error::OutOfRange {
            what: "h_ref",
            value: h_ref,
            range: format!("(0, eps/20] = (0, {cap:.3e}]"),
        });
    }
    Ok(())
}

/// Reference solution of the full system: fixed-step 4th-order integration at
/// `h_ref` (at most `eps/20`), recording every step up to `t_final`, with a
/// mandatory step-halving self-check of the endpoint.
///
/// Long horizons overflow the step-recording cap; use
/// [`integrate_reference_at`] to sample a long run at selected times instead.
pub fn integrate_reference(
    sys: &MultiscaleSystem,
    s0: &State,
    h_ref: f64,
    t_final: f64,
) -> Result<Trajectory> {
    validate_h_ref(sys, h_ref)?;
    let duration = t_final - s0.t;
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter {
            what: "t_final",
            value: t_final,
            requirement: "greater than the initial time",
        });
    }
    let n_total = (duration / h_ref).ceil() as usize;
    if n_total > RECORD_CAP {
        return Err(Error::InvalidParameter {
            what: "step count",
            value: n_total as f64,
            requirement: "below the recording cap; sample long runs with integrate_reference_at",
        });
    }
    let h = duration / n_total as f64;
    let dim = sys.fast_dim() + sys.slow_dim();
    let initial = pack(s0);

    let mut fbuf = vec![0.0; sys.fast_dim()];
    let mut stepper = Rk4::new(dim, full_rhs(sys, &mut fbuf));
    let mut state = initial.clone();
    let mut states = Vec::with_capacity(n_total + 1);
    states.push(unpack(sys, &state, s0.t));
    for k in 0..n_total {
        stepper.step(&mut state, h);
        let t = s0.t + (k + 1) as f64 * h;
        check_finite(&state, t)?;
        states.push(unpack(sys, &state, t));
    }
    drop(stepper);

    // step-halving self-check of the endpoint
    let mut fbuf2 = vec![0.0; sys.fast_dim()];
    let halved = rk4_at_times(
        dim,
        full_rhs(sys, &mut fbuf2),
        &initial,
        &[s0.t, t_final],
        h / 2.0,
        false,
    )?;
    let endpoint = pack(states.last().unwrap());
    let diff = scaled_diff(&endpoint, &halved[1]);
    if diff > REFERENCE_CHECK_TOL {
        return Err(Error::AccuracyCheck {
            achieved: diff,
            required: REFERENCE_CHECK_TOL,
            h: h_ref,
        });
    }

    Ok(Trajectory {
        states,
        kind: SchemeKind::Reference,
        config: TrajectoryConfig::FixedStep(h_ref),
        micro_bursts: None,
    })
}

/// Reference solution of the full system sampled exactly at `times` (the
/// first entry must equal `s0.t`). Inside each gap the step is the largest
/// value not exceeding `h_ref` that divides the gap, so samples carry no
/// time-matching error. The endpoint passes the same step-halving self-check
/// as [`integrate_reference`].
pub fn integrate_reference_at(
    sys: &MultiscaleSystem,
    s0: &State,
    h_ref: f64,
    times: &[f64],
) -> Result<Trajectory> {
    validate_h_ref(sys, h_ref)?;
    if times.first() != Some(&s0.t) {
        return Err(Error::InvalidParameter {
            what: "sample times",
            value: times.first().copied().unwrap_or(f64::NAN),
            requirement: "first sample must equal the initial time",
        });
    }
    let dim = sys.fast_dim() + sys.slow_dim();
    let initial = pack(s0);

    let mut fbuf = vec![0.0; sys.fast_dim()];
    let coarse = rk4_at_times(dim, full_rhs(sys, &mut fbuf), &initial, times, h_ref, false)?;
    let mut fbuf2 = vec![0.0; sys.fast_dim()];
    let fine = rk4_at_times(dim, full_rhs(sys, &mut fbuf2), &initial, times, h_ref, true)?;
    let diff = scaled_diff(coarse.last().unwrap(), fine.last().unwrap());
    if diff > REFERENCE_CHECK_TOL {
        return Err(Error::AccuracyCheck {
            achieved: diff,
            required: REFERENCE_CHECK_TOL,
            h: h_ref,
        });
    }

    let states = coarse
        .into_iter()
        .zip(times)
        .map(|(packed, &t)| unpack(sys, &packed, t))
        .collect();
    Ok(Trajectory {
        states,
        kind: SchemeKind::Reference,
        config: TrajectoryConfig::FixedStep(h_ref),
        micro_bursts: None,
    })
}

fn reduced_state(y: &[f64], t: f64) -> State {
    State::new(Vec::new(), y.to_vec(), t)
}

/// Integrate the reduced dynamics `dY/dt = G(Y)` from `y0` at time zero.
///
/// `Euler1` applies the plain first-order recursion
/// `Y_{m+1} = Y_m + h G(Y_m)` with the step exactly as given, recording every
/// iterate; the step count is the largest whose end time stays within
/// `t_final`. `Ref4` snaps the step to divide the horizon, records every step
/// and self-checks by halving.
pub fn integrate_reduced(
    sys: &MultiscaleSystem,
    y0: &[f64],
    h: f64,
    t_final: f64,
    method: ReducedMethod,
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            what: "h",
            value: h,
            requirement: "finite and > 0",
        });
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter {
            what: "t_final",
            value: t_final,
            requirement: "> 0",
        });
    }
    let n = sys.slow_dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "y0",
            expected: n,
            actual: y0.len(),
        });
    }

    match method {
        ReducedMethod::Euler1 => {
            let ratio = t_final / h;
            let n_steps = (ratio + super::HORIZON_SLACK * ratio.max(1.0)).floor() as usize;
            if n_steps > RECORD_CAP {
                return Err(Error::InvalidParameter {
                    what: "step count",
                    value: n_steps as f64,
                    requirement: "below the recording cap",
                });
            }
            let mut scratch = vec![0.0; sys.fast_dim()];
            let mut gbuf = vec![0.0; n];
            let mut y = y0.to_vec();
            let mut states = Vec::with_capacity(n_steps + 1);
            states.push(reduced_state(&y, 0.0));
            for k in 0..n_steps {
                sys.reduced_rhs_into(&y, &mut scratch, &mut gbuf);
                for j in 0..n {
                    y[j] += h * gbuf[j];
                }
                let t = (k + 1) as f64 * h;
                check_finite(&y, t)?;
                states.push(reduced_state(&y, t));
            }
            Ok(Trajectory {
                states,
                kind: SchemeKind::Reduced,
                config: TrajectoryConfig::FixedStep(h),
                micro_bursts: None,
            })
        }
        ReducedMethod::Ref4 => {
            let n_steps = ((t_final / h).ceil() as usize).max(1);
            if n_steps > RECORD_CAP {
                return Err(Error::InvalidParameter {
                    what: "step count",
                    value: n_steps as f64,
                    requirement: "below the recording cap; sample long runs with integrate_reduced_at",
                });
            }
            let h_snap = t_final / n_steps as f64;
            let mut scratch = vec![0.0; sys.fast_dim()];
            let mut rhs = |y: &[f64], out: &mut [f64]| sys.reduced_rhs_into(y, &mut scratch, out);
            let mut stepper = Rk4::new(n, &mut rhs);
            let mut y = y0.to_vec();
            let mut states = Vec::with_capacity(n_steps + 1);
            states.push(reduced_state(&y, 0.0));
            for k in 0..n_steps {
                stepper.step(&mut y, h_snap);
                let t = (k + 1) as f64 * h_snap;
                check_finite(&y, t)?;
                states.push(reduced_state(&y, t));
            }
            drop(stepper);

            let mut scratch2 = vec![0.0; sys.fast_dim()];
            let halved = rk4_at_times(
                n,
                |y, out| sys.reduced_rhs_into(y, &mut scratch2, out),
                y0,
                &[0.0, t_final],
                h_snap / 2.0,
                false,
            )?;
            let diff = scaled_diff(&states.last().unwrap().y, &halved[1]);
            if diff > REDUCED_CHECK_TOL {
                return Err(Error::AccuracyCheck {
                    achieved: diff,
                    required: REDUCED_CHECK_TOL,
                    h,
                });
            }
            Ok(Trajectory {
                states,
                kind: SchemeKind::Reduced,
                config: TrajectoryConfig::FixedStep(h),
                micro_bursts: None,
            })
        }
    }
}

/// High-accuracy reduced solution sampled exactly at `times` (first entry
/// zero), 4th-order with per-gap snapped steps of at most `h` and a
/// step-halving self-check.
pub fn integrate_reduced_at(
    sys: &MultiscaleSystem,
    y0: &[f64],
    h: f64,
    times: &[f64],
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            what: "h",
            value: h,
            requirement: "finite and > 0",
        });
    }
    let n = sys.slow_dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "y0",
            expected: n,
            actual: y0.len(),
        });
    }
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidParameter {
            what: "sample times",
            value: times.first().copied().unwrap_or(f64::NAN),
            requirement: "first sample must be 0",
        });
    }
    let mut scratch = vec![0.0; sys.fast_dim()];
    let coarse = rk4_at_times(
        n,
        |y, out| sys.reduced_rhs_into(y, &mut scratch, out),
        y0,
        times,
        h,
        false,
    )?;
    let mut scratch2 = vec![0.0; sys.fast_dim()];
    let fine = rk4_at_times(
        n,
        |y, out| sys.reduced_rhs_into(y, &mut scratch2, out),
        y0,
        times,
        h,
        true,
    )?;
    let diff = scaled_diff(coarse.last().unwrap(), fine.last().unwrap());
    if diff > REDUCED_CHECK_TOL {
        return Err(Error::AccuracyCheck {
            achieved: diff,
            required: REDUCED_CHECK_TOL,
            h,
        });
    }
    let states = coarse
        .into_iter()
        .zip(times)
        .map(|(y, &t)| reduced_state(&y, t))
        .collect();
    Ok(Trajectory {
        states,
        kind: SchemeKind::Reduced,
        config: TrajectoryConfig::FixedStep(h),
        micro_bursts: None,
    })
}
