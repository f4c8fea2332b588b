use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core algorithms.
///
/// The variants map onto the CLI's exit-code classes: `Config` and `Request`
/// are configuration problems, `Graph`/`Shape`/`Consistency` are data
/// problems, and `Numerical`/`Training`/`Weighting` are numerical failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid sample request: {0}")]
    Request(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeRange { id: u64, num_nodes: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("propagation matrix does not match graph: {0}")]
    Consistency(String),
    #[error("cannot build a sampling distribution over an empty edge set")]
    EmptyDistribution,
    #[error("training error: {0}")]
    Training(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("estimator weighting error: {0}")]
    Weighting(String),
}
