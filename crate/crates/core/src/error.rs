use crate::orlicz::Trajectory;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Inner maximisation of a conjugate did not converge.
    #[error(
        "conjugate solve did not converge at v = {point:?} after {} recorded steps (final residual {:e})",
        .trace.len(),
        .trace.last().copied().unwrap_or(f64::NAN)
    )]
    ConjugateNonConvergence { point: Vec<f64>, trace: Vec<f64> },

    #[error("conjugate solve failed at t = {t}: {source}")]
    ConjugateAtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("bracket search failed: {0}")]
    BracketFailure(String),

    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),

    #[error("line search failed after {iterations} iterations (gradient norm {grad_norm:e})")]
    LineSearchFailure {
        iterations: usize,
        grad_norm: f64,
        last: Box<Trajectory>,
    },

    #[error("maximum iterations ({iterations}) exceeded (gradient norm {grad_norm:e})")]
    MaxIterations {
        iterations: usize,
        grad_norm: f64,
        last: Box<Trajectory>,
    },

    #[error("descent failure: {0}")]
    DescentFailure(String),

    #[error("ratio unbounded below ({0}); input is probably not symplectic")]
    UnboundedRatio(String),

    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),

    #[error("multiplier sign violation: lambda = {0} (expected < 0)")]
    MultiplierSign(f64),

    #[error("period not detected within t = {max_time}")]
    PeriodNotDetected { max_time: f64 },

    #[error("integrator drift {drift:e} exceeds tolerance {tol:e}")]
    IntegratorDrift { drift: f64, tol: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
