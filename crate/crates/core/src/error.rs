use thiserror::Error;

/// Errors produced anywhere in the coloring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("graph has {n} nodes, brute force is limited to {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("node {0} has no color")]
    MissingNode(usize),

    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("event localization failed at t={t}: {msg}")]
    EventLocalization { t: f64, msg: String },

    #[error("simulation budget exceeded after {steps} steps (t={t})")]
    Budget { steps: usize, t: f64 },

    #[error("not enough spikes: node {node} has {got}, need {need}")]
    InsufficientSpikes {
        node: usize,
        got: usize,
        need: usize,
    },

    #[error("oscillators are not synchronized")]
    NotSynchronized,

    #[error("projection onto the eigenspace vanishes")]
    ZeroProjection,

    #[error("orders cover different node sets")]
    InconsistentOrders,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
