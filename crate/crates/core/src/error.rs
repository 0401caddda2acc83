use thiserror::Error;

/// Errors raised by mesh construction, kernel assembly and the time steppers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("history length {got} does not match kernel row of step {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("nonpositive leading kernel coefficient at step {step}")]
    NonPositiveKernel { step: usize },

    #[error(
        "sum-of-exponentials verification failed: relative error {max_error:.3e} exceeds {tol:.3e}"
    )]
    SoeCertification { max_error: f64, tol: f64 },

    #[error("out-of-order fast history update: state at step {state}, requested step {requested}")]
    HistoryOrder { state: usize, requested: usize },

    #[error(
        "linear solver did not converge after {iterations} iterations \
         (relative residual {residual:.3e}, shift {shift:.3e}, max reaction {max_diag:.3e})"
    )]
    SolverDivergence {
        iterations: usize,
        residual: f64,
        shift: f64,
        max_diag: f64,
    },

    #[error("step {step} (t = {time:.6e}) failed: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("adaptive controller exceeded {retries} retries at t = {time:.6e} (last estimate {estimate:.3e})")]
    RetryLimit {
        retries: usize,
        time: f64,
        estimate: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
