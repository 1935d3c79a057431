//! Error type shared across the crate.

use crate::integrators::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector argument does not match the system's dimensions.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A scalar parameter is invalid (non-finite, non-positive, ...).
    #[error("invalid {what}: {value} ({requirement})")]
    InvalidParameter {
        what: &'static str,
        value: f64,
        requirement: &'static str,
    },

    /// A step produced a non-finite component. `component` names the offending
    /// entry (e.g. `x[0]`), `micro_index` the micro step within the burst when
    /// applicable.
    #[error("non-finite {component} at t = {t}{}", micro_index.map(|m| format!(" (micro step {m})")).unwrap_or_default())]
    NonFinite {
        component: String,
        t: f64,
        micro_index: Option<usize>,
    },

    /// A macro step produced a non-finite state; carries the last finite state
    /// reached before the failure.
    #[error("macro step diverged ({component} non-finite); last finite state at t = {}", last_finite.t)]
    MacroStepDiverged {
        component: String,
        last_finite: crate::system::State,
    },

    /// An integration run diverged; carries the trajectory accumulated up to
    /// the failing macro step.
    #[error("integration diverged at macro step {macro_index}: {reason}")]
    Diverged {
        macro_index: usize,
        reason: String,
        partial: Box<Trajectory>,
    },

    /// A bound evaluator was called outside its domain of validity.
    #[error("{what} outside valid range: {value} (requires {range})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    /// The requested bound does not apply under the given parameters
    /// (contraction over macro steps fails, so the deviation of the fast
    /// variables is not controlled).
    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),

    /// A step-halving self-check of a reference integration failed.
    #[error("step-halving self-check failed: scaled difference {achieved:.3e} exceeds {required:.1e}; use a smaller step than {h:.3e}")]
    AccuracyCheck { achieved: f64, required: f64, h: f64 },

    /// Weight vector length does not match the burst length.
    #[error("weight vector has {actual} entries, burst produces {expected}")]
    WeightLength { expected: usize, actual: usize },

    /// Weights do not sum to one within the tolerance of the normalization
    /// constraint.
    #[error("weights violate the normalization constraint: sum = {sum:.17e}")]
    WeightNormalization { sum: f64 },

    /// An oracle trajectory does not cover a requested timestamp.
    #[error("oracle does not cover t = {t}: nearest sample at {nearest} (tolerance {tol:.3e})")]
    UncoveredTimestamp { t: f64, nearest: f64, tol: f64 },

    /// Malformed or inconsistent experiment spec.
    #[error("invalid experiment spec: {0}")]
    Spec(String),

    /// One run of a parameter sweep failed; names the swept value.
    #[error("experiment run at sweep value {sweep_value:.17e} failed: {source}")]
    ExperimentRun {
        sweep_value: f64,
        #[source]
        source: Box<Error>,
    },

    /// Log-log regression requires strictly positive data.
    #[error("regression domain error: {0}")]
    Regression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error reflects numerical divergence of a run rather than
    /// a misuse of the API. Used by callers to pick exit codes.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::MacroStepDiverged { .. } | Error::Diverged { .. } => {
                true
            }
            Error::ExperimentRun { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
