//! Slow–fast model class, the approximate slow manifold and the reduced
//! dynamics, plus the built-in reference system used by the experiments.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::inf_norm;

/// Fast forcing `f(y)`, written into a caller-provided buffer of length `m`.
pub type FastForcing = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Slow vector field `g(x, y)`, written into a buffer of length `n`.
pub type SlowField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Relative slack allowed when checking the time normalization
/// `min(lambda_ii) = 1`.
const LAMBDA_MIN_TOL: f64 = 1e-12;

/// A slow–fast system
///
/// ```text
/// dy/dt = g(x, y)
/// dx/dt = (1/eps) * (-L x + f(y))
/// ```
///
/// with `L` diagonal, positive, and normalized so that its smallest entry is
/// one. The vector fields are opaque callables; dimensions are carried
/// explicitly.
#[derive(Clone)]
pub struct MultiscaleSystem {
    slow_dim: usize,
    fast_dim: usize,
    epsilon: f64,
    lambda_diag: Vec<f64>,
    fast_forcing: FastForcing,
    slow_field: SlowField,
}

impl fmt::Debug for MultiscaleSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiscaleSystem")
            .field("slow_dim", &self.slow_dim)
            .field("fast_dim", &self.fast_dim)
            .field("epsilon", &self.epsilon)
            .field("lambda_diag", &self.lambda_diag)
            .finish_non_exhaustive()
    }
}

/// Parameters of the built-in reference system
///
/// ```text
/// dy/dt = -x y - a y^2
/// dx/dt = (-x + sin^2(b y)) / eps
/// ```
///
/// `b` controls the Lipschitz constant of the fast forcing, `a` the slow
/// nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySystemParams {
    pub a: f64,
    pub b: f64,
}

/// One point of a trajectory: fast variables `x`, slow variables `y`, time.
///
/// Reduced trajectories store the reduced variables in `y` and leave `x`
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64) -> Self {
        State { x, y, t }
    }
}

impl MultiscaleSystem {
    /// Build a system from dimensions, time-scale parameter, the diagonal of
    /// the fast contraction matrix, and the two vector fields.
    pub fn new(
        slow_dim: usize,
        fast_dim: usize,
        epsilon: f64,
        lambda_diag: Vec<f64>,
        fast_forcing: FastForcing,
        slow_field: SlowField,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                what: "epsilon",
                value: epsilon,
                requirement: "finite and > 0",
            });
        }
        if lambda_diag.len() != fast_dim {
            return Err(Error::DimensionMismatch {
                what: "lambda_diag",
                expected: fast_dim,
                actual: lambda_diag.len(),
            });
        }
        if slow_dim == 0 || fast_dim == 0 {
            return Err(Error::InvalidParameter {
                what: "dimension",
                value: 0.0,
                requirement: "slow_dim and fast_dim must be positive",
            });
        }
        let min = lambda_diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::InvalidParameter {
                what: "lambda_diag entry",
                value: min,
                requirement: "every diagonal entry must be > 0",
            });
        }
        if (min - 1.0).abs() > LAMBDA_MIN_TOL {
            return Err(Error::InvalidParameter {
                what: "min(lambda_diag)",
                value: min,
                requirement: "time normalization requires min(lambda_ii) = 1",
            });
        }
        Ok(MultiscaleSystem {
            slow_dim,
            fast_dim,
            epsilon,
            lambda_diag,
            fast_forcing,
            slow_field,
        })
    }

    /// The built-in reference system (see [`ToySystemParams`]); scalar slow
    /// and fast variables, unit contraction rate.
    pub fn toy(params: ToySystemParams, epsilon: f64) -> Self {
        let ToySystemParams { a, b } = params;
        MultiscaleSystem::new(
            1,
            1,
            epsilon,
            vec![1.0],
            Arc::new(move |y: &[f64], out: &mut [f64]| {
                out[0] = (b * y[0]).sin().powi(2);
            }),
            Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
                out[0] = -x[0] * y[0] - a * y[0] * y[0];
            }),
        )
        .expect("toy system parameters are always valid")
    }

    pub fn slow_dim(&self) -> usize {
        self.slow_dim
    }

    pub fn fast_dim(&self) -> usize {
        self.fast_dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda_diag(&self) -> &[f64] {
        &self.lambda_diag
    }

    /// Largest diagonal entry of the contraction matrix.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_diag.iter().cloned().fold(1.0, f64::max)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.fast_dim {
            return Err(Error::DimensionMismatch {
                what: "x",
                expected: self.fast_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn check_y(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.slow_dim {
            return Err(Error::DimensionMismatch {
                what: "y",
                expected: self.slow_dim,
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Slow right-hand side `g(x, y)`.
    pub fn slow_rhs(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        self.check_y(y)?;
        let mut out = vec![0.0; self.slow_dim];
        (self.slow_field)(x, y, &mut out);
        Ok(out)
    }

    /// Fast right-hand side `(1/eps) * (-L x + f(y))`, componentwise.
    pub fn fast_rhs(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        self.check_y(y)?;
        let mut fy = vec![0.0; self.fast_dim];
        (self.fast_forcing)(y, &mut fy);
        let mut out = vec![0.0; self.fast_dim];
        for i in 0..self.fast_dim {
            out[i] = (fy[i] - self.lambda_diag[i] * x[i]) / self.epsilon;
        }
        Ok(out)
    }

    /// The approximate slow manifold `x = L^-1 f(y)`, componentwise quotient
    /// `f(y)_i / lambda_ii`.
    pub fn manifold(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_y(y)?;
        let mut fy = vec![0.0; self.fast_dim];
        (self.fast_forcing)(y, &mut fy);
        for i in 0..self.fast_dim {
            fy[i] /= self.lambda_diag[i];
        }
        Ok(fy)
    }

    /// Distance `|x - L^-1 f(y)|` of the fast variables from the approximate
    /// slow manifold, in the infinity norm.
    pub fn manifold_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let m = self.manifold(y)?;
        let diff: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a - b).collect();
        Ok(inf_norm(&diff))
    }

    /// Reduced slow vector field `G(Y) = g(L^-1 f(Y), Y)`, evaluated on the
    /// approximate manifold.
    pub fn reduced_rhs(&self, y_reduced: &[f64]) -> Result<Vec<f64>> {
        let m = self.manifold(y_reduced)?;
        self.slow_rhs(&m, y_reduced)
    }

    /// Evaluate `f(y)` into `out` without allocating. Internal fast path for
    /// the integrators.
    pub(crate) fn fast_forcing_into(&self, y: &[f64], out: &mut [f64]) {
        (self.fast_forcing)(y, out);
    }

    /// Evaluate `g(x, y)` into `out` without allocating.
    pub(crate) fn slow_field_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.slow_field)(x, y, out);
    }

    /// Evaluate `G(Y)` into `out`, using `scratch` (length `fast_dim`) for the
    /// manifold point.
    pub(crate) fn reduced_rhs_into(&self, y: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        (self.fast_forcing)(y, scratch);
        for i in 0..self.fast_dim {
            scratch[i] /= self.lambda_diag[i];
        }
        (self.slow_field)(scratch, y, out);
    }
}

/// A system with `g = 0` and `f = 0`: pure linear decay of the fast variables.
/// Handy in tests.
pub fn decay_system(fast_dim: usize, lambda_diag: Vec<f64>, epsilon: f64) -> MultiscaleSystem {
    MultiscaleSystem::new(
        1,
        fast_dim,
        epsilon,
        lambda_diag,
        Arc::new(|_y, out| out.fill(0.0)),
        Arc::new(|_x, _y, out| out.fill(0.0)),
    )
    .expect("decay system parameters are valid")
}
