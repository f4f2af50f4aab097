use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("cell {cell} has non-positive measure {measure:e}")]
    DegenerateCell { cell: usize, measure: f64 },
    #[error("element {element} is inverted (jacobian {jacobian:e})")]
    InvertedElement { element: usize, jacobian: f64 },
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{model}: state outside the model domain ({reason})")]
pub struct DomainError {
    pub model: &'static str,
    pub reason: String,
}

impl DomainError {
    pub fn new(model: &'static str, reason: impl Into<String>) -> Self {
        DomainError { model, reason: reason.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("CFL violated at vertex {vertex}: dt = {dt:e} exceeds the admissible {dt_max:e}")]
    Cfl { vertex: usize, dt: f64, dt_max: f64 },
    #[error("source step bound tau0 is zero")]
    ZeroTau0,
    #[error("invariant violation at vertex {vertex}: {what}")]
    InvariantViolation { vertex: usize, what: String },
    #[error("line search precondition failed at vertex {vertex} for constraint `{constraint}` (value {value:e})")]
    LineSearch { vertex: usize, constraint: String, value: f64 },
    #[error("consistent mass solve did not converge: residual {residual:e} after {iterations} iterations")]
    MassSolve { residual: f64, iterations: usize },
    #[error("consistent mass matrix requested but not available for this discretization")]
    MissingMass,
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<SolverError>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("row {row}: alpha coefficients sum to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("row {row}, column {col}: negative coefficient")]
    Negative { row: usize, col: usize },
    #[error("row {row}, column {col}: beta is nonzero where alpha vanishes")]
    BetaWithoutAlpha { row: usize, col: usize },
    #[error("tableau has no positive alpha/beta ratio")]
    NoSspCoefficient,
    #[error("malformed tableau: {0}")]
    Shape(String),
}
