use thiserror::Error;

/// Errors raised by the autoencoder library.
#[derive(Debug, Error)]
pub enum LaeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite entry at {0}")]
    NonFinite(String),

    #[error("Sigma_XX is not invertible (condition number {condition:.3e}); set a ridge to regularize")]
    SingularCovariance { condition: f64 },

    #[error("matrix is rank deficient: {what} (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { what: String, ratio: f64 },

    #[error("singular Gram matrix: {0}")]
    SingularGram(String),

    #[error("matrix is not Hermitian: {what} (relative asymmetry {residual:.3e})")]
    NotHermitian { what: String, residual: f64 },

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("combinatorial cap exceeded: C({n},{p}) = {count} > {cap}")]
    CapExceeded { n: usize, p: usize, count: u128, cap: u128 },

    #[error("no escape direction: the point is already at the global minimum")]
    NoEscape,

    #[error("point is not critical (residuals {residual_b:.3e}, {residual_a:.3e})")]
    NotCritical { residual_b: f64, residual_a: f64 },

    #[error("operation requires an auto-associative problem")]
    NotAutoAssociative,

    #[error("rank of W exceeds p={p} (singular value ratio {ratio:.3e})")]
    RankExceeded { p: usize, ratio: f64 },

    #[error("rank collapse at iteration {iteration}: condition number of {which} is {condition:.3e}")]
    RankCollapse {
        iteration: usize,
        which: &'static str,
        condition: f64,
    },

    #[error("duplicate eigenvalues in synthetic spectrum: {0}")]
    DuplicateEigenvalues(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LaeError>;
