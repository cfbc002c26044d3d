use thiserror::Error;

pub type Result<T> = std::result::Result<T, BcError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid spin value {0}; entries must be -1, 0 or +1")]
    InvalidSpin(i64),

    #[error("node index {index} out of range for {m} nodes")]
    InvalidNode { index: usize, m: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("exact enumeration refused: {m} nodes exceeds the cap of {cap}")]
    EnumerationCap { m: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample matrix")]
    EmptySample,

    #[error("node {node}: parameter {coord} diverged (|value| > {limit}); data lie on the boundary of the mean space")]
    Degenerate {
        node: usize,
        coord: usize,
        limit: f64,
    },

    #[error("node {node}: {source}")]
    Node { node: usize, source: Box<BcError> },

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("free energy undefined at beta = 0")]
    ZeroBeta,

    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(String),
}

impl BcError {
    pub fn at_node(self, node: usize) -> Self {
        match self {
            e @ (BcError::Degenerate { .. } | BcError::Node { .. }) => e,
            other => BcError::Node {
                node,
                source: Box::new(other),
            },
        }
    }

    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            BcError::Degenerate { .. } | BcError::Singular | BcError::ZeroBeta => true,
            BcError::Node { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

/// Collect parallel results, reporting the error with the lowest index so
/// that failures do not depend on thread scheduling.
pub(crate) fn in_order<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

impl From<std::io::Error> for BcError {
    fn from(e: std::io::Error) -> Self {
        BcError::Io(e.to_string())
    }
}
