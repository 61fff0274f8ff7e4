use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the stage that raises them;
/// the CLI maps them onto the documented exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // ---- shape / input contract violations ----
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not Hermitian: |A - A*| = {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("ill-formed problem: {0}")]
    IllFormed(String),

    // ---- numerical failures ----
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("span closure exceeded the ambient dimension ({got} > {ambient})")]
    DimensionBlowup { got: usize, ambient: usize },
    #[error("problem size exceeds ceiling: total PSD dimension {got} > {limit}")]
    SizeExceeded { got: usize, limit: usize },
    #[error("objective is unbounded above")]
    Unbounded,

    // ---- domain preconditions ----
    #[error("Paulsen families are linearly dependent; the space is ill-posed")]
    DegenerateOverlap,
    #[error("map domain is not the full matrix algebra (dim {got}, need {need})")]
    NotFullAlgebra { got: usize, need: usize },
    #[error("map is zero; cb-norm scaling is undefined")]
    ZeroMap,
    #[error("map is degenerate (columns or rows of the values do not span)")]
    Degenerate,
    #[error("map is not completely contractive; no unital extension exists")]
    ExtensionInfeasible,
    #[error("grading split failed: off-grade mass {0:.3e} (numerical corruption)")]
    GradingSplitFailure(f64),
    #[error("map is not idempotent: |Phi∘Phi - Phi| = {0:.3e}")]
    NotIdempotent(f64),
    #[error("map is not unital completely positive: {0}")]
    NotUcp(String),
    #[error("element is outside the range of the projection (distance {0:.3e})")]
    OutsideRange(f64),
    #[error("point lies outside the open unit disc: |z| = {0}")]
    OutsideDisc(f64),
    #[error("extreme-point sampler exhausted its budget without a certified candidate")]
    SamplerExhausted,
    #[error("verdict is indeterminate: {0}")]
    Indeterminate(String),

    // ---- I/O ----
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
