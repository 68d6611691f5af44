//! Crate-wide error type.

/// Errors produced by graph ingestion, numeric routines, and pipelines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed edge record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate edge ({src}, {dst})")]
    DuplicateEdge { line: usize, src: String, dst: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: String },
    #[error("line {line}: zero rating on edge ({src}, {dst}) has no sign")]
    ZeroRating { line: usize, src: String, dst: String },
    #[error("graph has too few edges for this operation")]
    EmptyGraph,
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrices have different nonzero patterns")]
    TopologyMismatch,
    #[error("matrix supports do not match")]
    SupportMismatch,
    #[error("graph with {nodes} nodes exceeds brute-force cap {cap}")]
    GraphTooLarge { nodes: usize, cap: usize },
    #[error("Tr(|A|^3) below {eps}: no directed 3-cycles to differentiate")]
    DegenerateDenominator { eps: f64 },
    #[error("budget of {budget} flips exceeds edge count {edges}")]
    BudgetExceedsEdges { budget: usize, edges: usize },
    #[error("{edges} edges exceed exhaustive-search cap {cap}")]
    TooManyEdges { edges: usize, cap: usize },
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("need both classes present to rank")]
    SingleClass,
    #[error("prediction and label lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint corrupt: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::MalformedLine { .. }
            | Error::DuplicateEdge { .. }
            | Error::SelfLoop { .. }
            | Error::ZeroRating { .. }
            | Error::EmptyGraph
            | Error::Io(_)
            | Error::Json(_)
            | Error::BadCheckpoint(_) => 3,
            _ => 4,
        }
    }
}
