use std::path::PathBuf;

use crate::graph::Edge;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("node index {node} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate softmax support: erasing {edge} leaves node {} with no in-edges", edge.dst)]
    DegenerateSoftmax { edge: Edge },

    #[error("edge {0} is not in the message-passing support")]
    EdgeNotInSupport(Edge),

    #[error("graph is missing self-loops; call add_self_loops first")]
    MissingSelfLoops,

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("non-finite loss at epoch {epoch}: {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure is numerical (non-finite values, an emptied
    /// softmax) rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::DegenerateSoftmax { .. }
        )
    }
}
