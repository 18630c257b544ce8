use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Gram matrix is not positive definite (pivot {pivot:e} at row {row})")]
    GramNotPositiveDefinite { row: usize, pivot: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not generate an orthogonally separable dataset after {0} attempts")]
    GenerationExhausted(usize),

    #[error("neuron {neuron} is orthogonal to the class direction (a_j w_j^T phi = {value:e})")]
    TieEncountered { neuron: usize, value: f64 },

    #[error("network width {k} exceeds input dimension {d}")]
    WidthExceedsDimension { k: usize, d: usize },

    #[error("channel mismatch: program has {program} channels, input has {input}")]
    ChannelMismatch { program: usize, input: usize },

    #[error("no live initialisation found after {0} attempts")]
    LivenessExhausted(usize),

    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("max-margin problem is infeasible")]
    Infeasible,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("exponent condition violated: {0}")]
    ExponentConditionViolated(String),

    #[error("training budget of {steps} steps exhausted at loss {loss:e}")]
    BudgetExhaustedBeforeLoss { steps: usize, loss: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
