use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate node label `{0}`")]
    DuplicateNodeLabel(String),

    #[error("non-binary adjacency entry at ({row}, {col})")]
    NonBinaryEntry { row: usize, col: usize },

    #[error("nonzero diagonal entry at node {0}")]
    NonzeroDiagonal(usize),

    #[error("asymmetric entry in undirected view at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix I + 4Σ is numerically singular")]
    SingularMatrix,

    #[error("matrix is not positive definite: {0}")]
    NonPositiveDefinite(String),

    #[error("fused precision is not positive definite")]
    FusedPrecisionNotPd,

    #[error("target configuration is rank deficient; Procrustes rotation undefined")]
    DegenerateSvd,

    #[error("view has no observed links")]
    NoObservedLinks,

    #[error("labels are all positive or all negative")]
    DegenerateLabels,

    #[error("invalid cross-validation plan: {0}")]
    InvalidPlan(String),

    #[error("line {line}: malformed edge `{text}`")]
    MalformedLine { line: usize, text: String },

    #[error("line {line}: self-loop on `{node}`")]
    SelfLoop { line: usize, node: String },

    #[error("line {line}: node `{node}` is not in the declared node list")]
    UnknownNode { line: usize, node: String },

    #[error("artifact: {0}")]
    Artifact(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
