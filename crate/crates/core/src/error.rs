use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported derivative order {order} (maximum is 2)")]
    UnsupportedOrder { order: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "Gram matrix along axis {axis} is not positive definite after adding nugget {nugget:e} \
         (pivot {pivot} = {value:e}); try a larger nugget"
    )]
    NotPositiveDefinite {
        axis: usize,
        nugget: f64,
        pivot: usize,
        value: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("optimizer diverged at iteration {iteration}: loss = {loss:e}")]
    Diverged {
        iteration: usize,
        loss: f64,
        trace: Vec<crate::optimizer::TraceRecord>,
    },

    #[error("Newton iteration did not converge after {iterations} steps (residual history: {history:?})")]
    NewtonFailed { iterations: usize, history: Vec<f64> },

    #[error("grid with {points} points exceeds the dense limit of {limit}")]
    TooLarge { points: usize, limit: usize },

    #[error("cache file error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
