use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Parameters violate a model invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    /// A labelled run is longer than the duration support allows.
    #[error("run of state {state} has length {length}, exceeding max duration {max}")]
    RunTooLong { state: usize, length: usize, max: usize },

    /// No segmentation of the series has positive probability.
    #[error("series has zero probability under the model")]
    Infeasible,

    /// The HSMM tables would exceed the configured work budget.
    #[error("decoding work T*D*J^2 = {work} exceeds budget {budget}")]
    TooExpensive { work: u128, budget: u128 },

    #[error("optimizer did not converge (gradient norm {grad_norm:e})")]
    NotConverged { best: Vec<f64>, grad_norm: f64 },

    #[error("non-finite log posterior at initialization of block {0}")]
    NonFiniteInit(String),

    #[error("empty input: {0}")]
    Empty(String),
}
