use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cell ({row}, {col}) outside the {rows}x{cols} grid")]
    CellOutOfRange { row: usize, col: usize, rows: usize, cols: usize },

    #[error("grid point ({i}, {j}) outside the {rows}x{cols} grid")]
    IndexOutOfRange { i: usize, j: usize, rows: usize, cols: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("evaluation times must be strictly increasing: {0}")]
    InvalidTimes(String),

    /// A left/right shift found no admissible column. Valid inputs never reach
    /// this; it means the selection recursion itself is broken.
    #[error("empty {kind} selection set for row {row}")]
    EmptySelection { row: usize, kind: &'static str },

    #[error("term for K={k:?} is not a valid integration by parts: {reason}")]
    InvalidTerm { k: Vec<usize>, reason: String },

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error("point does not lie in the product region")]
    NotInProduct,

    #[error("coordinates tie; cells are defined on open regions")]
    DegenerateTies,

    #[error("arity mismatch: expected {expected} points, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("drift field has no jacobian")]
    MissingJacobian,

    #[error("Picard iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("grid of the sheet sample does not match the requested grid")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
