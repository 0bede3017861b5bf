use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("degree homogeneity violated by entry {from} -> {target} at T^{power}")]
    Homogeneity { from: String, target: String, power: usize },

    #[error("not a complex: composition of consecutive maps is nonzero at degree {degree}")]
    NotAComplex { degree: usize },

    #[error("division by the zero polynomial")]
    DivisionByZero,

    #[error("retraction divergence from {point:?} (residual {residual:e})")]
    RetractionDivergence { point: Vec<f64>, residual: f64 },

    #[error("stiff region: step size underflow at t = {t} near {point:?}")]
    StiffRegion { t: f64, point: Vec<f64> },

    #[error("ambiguous capture: critical points {first} and {second} both within the capture radius")]
    AmbiguousCapture { first: usize, second: usize },

    #[error("degenerate critical point at {point:?} (smallest |eigenvalue| {eigenvalue:e})")]
    DegenerateCriticalPoint { point: Vec<f64>, eigenvalue: f64 },

    #[error("not Morse: degenerate critical point at {point:?}; perturb the function")]
    NotMorse { point: Vec<f64> },

    #[error("resolution exhausted while counting flow lines {from} -> {to}")]
    ResolutionExhausted { from: String, to: String },

    #[error("count inconsistency: d^2 != 0 at {from} -> {to}")]
    CountInconsistency { from: String, to: String },

    #[error("non-transversal configuration {from} -> {to} (k = {k}): estimated family dimension {family_dim}")]
    NonTransversal {
        from: String,
        to: String,
        k: usize,
        family_dim: usize,
    },

    #[error("orbit collision: critical points {first} and {second} are not separated")]
    OrbitCollision { first: String, second: String },

    #[error("broken limit unresolved: {0}")]
    LimitUnresolved(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("missing count for {from} -> {to} (k = {k}); assembly refused")]
    MissingCount { from: String, to: String, k: usize },

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
