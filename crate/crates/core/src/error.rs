use alloc::string::String;

/// Errors raised by mesh validation, operator assembly and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CmmError {
    #[error("invalid mesh: {0}")]
    Validation(String),
    #[error("degenerate triangle {face}: angle cotangent {cot:e} exceeds limit")]
    DegenerateTriangle { face: usize, cot: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("factorization of 2W + rho*A failed: {0}")]
    Factorization(String),
    #[error("columns are rank deficient in the mass metric (smallest Gram eigenvalue {0:e})")]
    RankDeficient(f64),
    #[error("dense eigensolver cap exceeded: N = {n} > {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = core::result::Result<T, CmmError>;
