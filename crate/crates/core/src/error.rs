use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("face {face:?} is shared by {count} cells")]
    NonManifoldFace { face: Vec<usize>, count: usize },

    #[error("degenerate geometry in {what} {index}: {detail}")]
    DegenerateGeometry {
        what: &'static str,
        index: usize,
        detail: String,
    },

    #[error("fracture plane {plane} is not a union of mesh faces: {detail}")]
    NonConformingFracture { plane: usize, detail: String },

    #[error("face {0} is not a fracture face")]
    NotAFractureFace(usize),

    #[error("inverted cell {0} after node perturbation")]
    InvertedCell(usize),

    #[error("barycentric weights failed for {what} {index}")]
    WeightSolve { what: &'static str, index: usize },

    #[error("sparse factorisation failed: {0}")]
    Factorisation(String),

    #[error("linear solve residual {residual:e} above tolerance {tol:e}")]
    LinearResidual { residual: f64, tol: f64 },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("problem with {dofs} unknowns exceeds the dense limit of {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("mesh has no fracture faces")]
    NoFracture,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported mesh file version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
