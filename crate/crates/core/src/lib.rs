//! Multiscale integrators for slow–fast ODE systems.
//!
//! The crate targets systems of the form
//!
//! ```text
//! dy/dt = g(x, y)                      (slow, dimension n)
//! dx/dt = (1/eps) * (-L x + f(y))      (fast, dimension m, L diagonal)
//! ```
//!
//! where the fast variables contract onto the approximate slow manifold
//! `x = L^-1 f(y)` on the time scale `eps`, and the slow variables follow the
//! reduced vector field `G(Y) = g(L^-1 f(Y), Y)`.
//!
//! Three coarse time-stepping schemes are provided, each built from a burst of
//! `M` explicit micro steps of size `dt` followed by one macro update of size
//! `DT`:
//!
//! - **Projective integration** (PI): the macro update extrapolates from the
//!   end of the burst, advancing time by `t_delta = DT + M*dt` per iteration.
//!   An algebraically equivalent weighted formulation is provided as a
//!   cross-check.
//! - **Seamless HMM**: micro steps advance both variable groups; the macro
//!   update restarts from the burst's initial point using a weighted
//!   vector-field estimate.
//! - **HMM** with frozen slow variables during the burst.
//!
//! The [`analysis`] module evaluates the rigorous a priori error bounds for
//! these schemes (manifold-distance bounds per burst and per run, reduction
//! error, discretization error) from a ledger of Lipschitz/bound constants,
//! and measures realized errors against high-accuracy reference integrations.
//! The [`experiments`] module reproduces three convergence-order scaling
//! experiments on a built-in reference system and fits log-log slopes.
//!
//! # Quick start
//!
//! ```
//! use slowfast::{MultiscaleSystem, State, ToySystemParams};
//! use slowfast::integrators::{integrate_steps, Scheme, SchemeConfig};
//!
//! let sys = MultiscaleSystem::toy(ToySystemParams { a: 1.0, b: 0.1 }, 1e-5);
//! let y0 = vec![1.0];
//! let x0 = sys.manifold(&y0).unwrap();
//! let s0 = State::new(x0, y0, 0.0);
//! let cfg = SchemeConfig::new(1e-6, 1e-3, 90).unwrap();
//! let traj = integrate_steps(&sys, &s0, &cfg, &Scheme::Projective, 10, false).unwrap();
//! assert_eq!(traj.states.len(), 11);
//! ```

// `!(x > 0.0)` style guards reject NaN where `x <= 0.0` would let it through;
// indexed loops walk several parallel arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod system;

pub use error::{Error, Result};
pub use system::{MultiscaleSystem, State, ToySystemParams};

/// Norm used when reporting vector magnitudes.
///
/// All bound comparisons in [`analysis`] use the infinity norm; the Euclidean
/// norm is offered for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Infinity,
    Euclidean,
}

/// Evaluate `norm` of `v`.
pub fn vector_norm(v: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Infinity => inf_norm(v),
        Norm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Infinity norm, the default for every bound comparison in this crate.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Compensated (Neumaier) summation.
///
/// Used wherever a sum must be trusted to well below one ulp of the result,
/// e.g. when checking the weight normalization constraint.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
