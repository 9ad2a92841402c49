use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Lengths, grids or multiplier dimensions disagree.
    #[error("structural error: {0}")]
    Structural(String),
    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid parameters supplied when building a functional or problem.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The pointwise Lagrangian derivative decreased along the bracket.
    #[error("derivative is not monotone at node {node}: objective is not strictly convex")]
    NonMonotone { node: usize },
    #[error("indeterminate sum of opposite infinities at node {node}")]
    Indeterminate { node: usize },
    /// Multipliers whose primal candidate violates the off-support side
    /// condition at the listed nodes.
    #[error("candidate rejected: side condition fails at {} node(s), first {:?}", nodes.len(), nodes.first())]
    CandidateRejected { nodes: Vec<usize> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
