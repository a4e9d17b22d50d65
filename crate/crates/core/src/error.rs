use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh level {level} outside supported range 1..={max}")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("element {element} has nonpositive signed area")]
    NonPositiveArea { element: usize },

    #[error("singular system: no acceptable pivot for row {row} (largest candidate {pivot:e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("constraint rows are linearly dependent: {rows:?}")]
    RankDeficientConstraints { rows: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("element {0} is not an element of the coarse mesh of this hierarchy")]
    NotInHierarchy(usize),

    #[error("corrector solve failed on coarse element {element}: {source}")]
    Corrector {
        element: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
