use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("the fiber over this point is infinite; pass an enumeration window")]
    MissingWindow,

    /// A sampling step is longer than the isometry radius of the base.
    /// The caller has to refine the sampling.
    #[error(
        "step {step} at index {index:?} exceeds the admissible radius {limit}; refine the sampling"
    )]
    Resolution {
        index: Option<usize>,
        step: f64,
        limit: f64,
    },

    /// Branch inconsistency found while lifting a grid. `cycle` lists the
    /// linear cell indices of a closed loop with non-trivial holonomy.
    #[error("topological obstruction: loop through cells {cycle:?} has holonomy {holonomy}")]
    Obstruction { cycle: Vec<usize>, holonomy: String },

    #[error(
        "unlifted cells remain: the admissible cells are not edge-connected ({remaining} cells)"
    )]
    Disconnected { remaining: usize },

    #[error("selection is empty or too small: {0}")]
    EmptySelection(String),

    #[error("pair budget exceeded: {work} pair evaluations > budget {budget}; use the directional seminorm or raise the budget")]
    Budget { work: u64, budget: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("points are not in a common fiber: {0}")]
    NotInFiber(String),

    #[error("ball schedule violates {condition}: {detail}")]
    Schedule { condition: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::TypeMismatch(msg.into())
    }
}
