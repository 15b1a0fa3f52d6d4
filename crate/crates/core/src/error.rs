use thiserror::Error;

use crate::dist::ModelKind;

/// Problems with input data: parse failures, invariant violations, support mismatches.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("record {record}: lower bound {lower} exceeds upper bound {upper}")]
    LowerAboveUpper { record: usize, lower: f64, upper: f64 },
    #[error("record {record}: both bounds are infinite")]
    BothInfinite { record: usize },
    #[error("record {record}: grouped row needs lower < upper, got [{lower}, {upper}]")]
    EmptyWindow { record: usize, lower: f64, upper: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("record {record}: value {value} is outside the support of the {model} model")]
    Support {
        record: usize,
        value: f64,
        model: ModelKind,
    },
}

/// Failures inside an estimation run or one of its steps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("observation {index}: interval has zero probability mass under the current parameters")]
    ZeroMass { index: usize },
    #[error("degenerate interval passed where a non-degenerate one is required")]
    DegenerateInterval,
    #[error("quantile level {0} is outside (0, 1)")]
    BadLevel(f64),
    #[error("M-step produced a non-positive variance ({0:e}); the data collapse to a point")]
    ZeroVariance(f64),
    #[error("M-step produced a zero scale; the conditional density is undefined")]
    DegenerateScale,
    #[error("shape equation has no unique root: all samples are equal")]
    NoUniqueRoot,
    #[error("sample value {0} must be strictly positive for this model")]
    NonPositiveSample(f64),
    #[error("M-step received no usable data")]
    EmptyMoments,
    #[error("parameters are invalid: {0}")]
    InvalidParams(String),
    #[error("parameter tags differ: {0} vs {1}")]
    ModelMismatch(ModelKind, ModelKind),
    #[error("unknown E-step strategy '{0}'")]
    UnknownStrategy(String),
    #[error("strategy '{strategy}' is not available for the {model} model")]
    UnsupportedStrategy { strategy: String, model: ModelKind },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("root search did not converge within {0} iterations")]
    RootSearch(usize),
    #[error("quadrature missed its tolerance within {nodes} nodes (error estimate {estimate:e})")]
    Quadrature { nodes: usize, estimate: f64 },
    #[error("maximizer sits on the search box boundary for '{0}'; widen the box")]
    BoxBoundary(String),
}

/// Problems with a simulation study configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("missing config key '{0}'")]
    MissingKey(String),
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("bad value for '{key}': {message}")]
    BadValue { key: String, message: String },
    #[error("invalid study: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}
