use crate::graph::{InteractionKind, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("not a DAG")]
    NotADag,

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("singular input to {kind} at node {node}")]
    Singular { node: NodeId, kind: InteractionKind },

    #[error("non-finite evaluation at node {node}")]
    NonFinite { node: NodeId },

    #[error("evaluation failed on sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no features registered")]
    NoFeatures,

    #[error("feature `{0}` already registered with a different semantic type")]
    FeatureConflict(String),

    #[error("feature `{0}` is not registered with the lattice")]
    UnregisteredFeature(String),

    #[error("unknown lattice cell {0}")]
    UnknownCell(String),

    #[error("filter starvation: no graph satisfied the filters in {attempts} attempts (acceptance rate {acceptance_rate})")]
    FilterStarvation { attempts: usize, acceptance_rate: f64 },

    #[error("graph is not initialized")]
    Uninitialized,

    #[error("criterion {criterion} is not defined for a {task}")]
    IncompatibleCriterion { criterion: String, task: String },

    #[error("fit before best")]
    FitBeforeBest,

    #[error("index {index} out of range for pool of {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("AUC undefined: {0}")]
    AucUndefined(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("stratum `{0}` has fewer rows than requested splits")]
    StratumTooSmall(String),

    #[error("column `{0}` has no non-missing values")]
    AllMissing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_sample(self, sample: usize) -> Self {
        Error::Sample {
            sample,
            source: Box::new(self),
        }
    }
}
