use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("kernel evaluation failed: {0}")]
    Kernel(String),

    #[error("exact arithmetic unavailable: {0}")]
    ExactUnsupported(String),

    #[error("enumeration budget exceeded (more than {cap} trajectories)")]
    EnumerationBudgetExceeded { cap: usize },

    #[error("degenerate estimand: {0}")]
    DegenerateEstimand(String),

    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("empty reference stratum: {0}")]
    EmptyReferenceStratum(String),

    #[error("empty risk set for case {0}")]
    EmptyRiskSet(usize),

    #[error("positivity failure: {0}")]
    PositivityFailure(String),

    #[error("degenerate functional: {0}")]
    DegenerateFunctional(String),

    #[error("empty strata: {}", .0.join(", "))]
    EmptyStratum(Vec<String>),

    #[error("design matrix has rank {rank} < {p}")]
    RankDeficient { rank: usize, p: usize },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    MaxIterations { iterations: usize, grad_norm: f64 },

    #[error("parameter out of domain: {0}")]
    DomainError(String),

    #[error("configuration error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
