use thiserror::Error;

/// Errors raised by the solver and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group closure exceeded {cap} elements; generators do not span a finite group")]
    ClosureOverflow { cap: usize },

    #[error("point {point:?} is not in the closure of the fundamental region")]
    NotInClosure { point: Vec<f64> },

    #[error("hypothesis scan failed: {0}")]
    HypothesisScanFailed(String),

    #[error("Q fails the midpoint convexity test at u = {u:?}, v = {v:?}")]
    NonConvexQ { u: Vec<f64>, v: Vec<f64> },

    #[error("grid would hold {nodes} nodes, above the cap of {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("explicit step blew up: |u| reached {norm} (bound {bound}); reduce dt")]
    StabilityViolation { norm: f64, bound: f64 },

    #[error("radial profile overflows: c*l = {cl} exceeds 700")]
    Overflow { cl: f64 },

    #[error("degenerate annulus: inner radius {inner} must be below outer radius {outer}")]
    DegenerateAnnulus { inner: f64, outer: f64 },

    #[error("no admissible glue width after {iterations} bisections")]
    NoAdmissibleDelta { iterations: usize },

    #[error("ball of radius {radius} at {center:?} is not contained in D_R")]
    BallOutsideD { center: Vec<f64>, radius: f64 },

    #[error("seed ball rejected: sup Q = {sup_q} exceeds q_bar = {q_bar}")]
    SeedBallRejected { sup_q: f64, q_bar: f64 },

    #[error("only {found} nodes in the fitting band, need at least {needed}")]
    InsufficientNodes { found: usize, needed: usize },

    #[error("flow at R = {radius} stopped at residual {residual} without converging")]
    NoConvergence { radius: f64, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("field file: {0}")]
    FieldFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
