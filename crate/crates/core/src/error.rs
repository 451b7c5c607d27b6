//! Error type shared across the laboratory.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or argument; message names the offending field.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A coefficient envelope violates hypothesis (H).
    #[error("coefficient envelope violates (H): {0}")]
    EnvelopeViolation(String),

    /// An operation requires a hypothesis that does not hold.
    #[error("hypothesis {hypothesis} fails (slack {slack:.6e})")]
    HypothesisFailed {
        hypothesis: &'static str,
        slack: f64,
    },

    /// Non-finite values where finite data is required.
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    /// Two fields live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The solution dipped below the undershoot tolerance: step size too
    /// large or (H1) violated.
    #[error("positivity loss at t = {t}: min u = {min_u:.6e}")]
    PositivityLoss { t: f64, min_u: f64 },

    /// The sup norm exceeded the global-existence bound by a wide factor;
    /// under (H1) this flags a solver defect, not physics.
    #[error("blow-up detected at t = {t}: sup u = {sup_u:.6e} > {bound:.6e}")]
    BlowupDetected { t: f64, sup_u: f64, bound: f64 },

    /// Iteration budget exhausted without reaching the requested tolerance.
    #[error("no convergence after {iterations} iterations: residual {residual:.6e} (history: {history:?})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// Pullback increments failed to decrease.
    #[error("pullback increments not Cauchy: {increments:?}")]
    NonCauchy { increments: Vec<f64> },

    /// A front reached the guard band near the box boundary.
    #[error("box too small: front at {position} within guard band at t = {t}")]
    BoxTooSmall { t: f64, position: f64 },

    /// No level crossing found (solution collapsed or threshold too high).
    #[error("no front: threshold {threshold} never crossed")]
    NoFront { threshold: f64 },

    /// Not enough stored states for the requested evaluation.
    #[error("insufficient stored states: {0}")]
    InsufficientStates(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed checkpoint, config, or field file.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach the failing time to a step error bubbling out of an
    /// integration loop.
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            Error::PositivityLoss { min_u, .. } => Error::PositivityLoss { t, min_u },
            Error::BlowupDetected { sup_u, bound, .. } => Error::BlowupDetected { t, sup_u, bound },
            other => other,
        }
    }
}
