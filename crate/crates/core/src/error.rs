use thiserror::Error;

pub type Result<T> = std::result::Result<T, CensusError>;

#[derive(Debug, Error)]
pub enum CensusError {
    /// Malformed document; `path` names the offending location (e.g. `generators[1][0]`).
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("matrix entries overflowed (max |entry| {max:.3e}); use shorter words")]
    Overflow { max: f64 },

    #[error("the empty word represents the identity class")]
    IdentityClass,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {count} samples, need at least {needed}")]
    InsufficientData { count: usize, needed: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate cone: all samples are zero")]
    DegenerateCone,

    #[error("linear form is not positive on the limit cone (value {value:.3e} on a hull ray)")]
    NotPositiveOnCone { value: f64 },

    #[error("quadratic form I is not positive definite (min eigenvalue {min_eig:.3e})")]
    InvalidI { min_eig: f64 },

    #[error("Hessian restricted to ker psi has a negative eigenvalue {min_eig:.3e}")]
    ConvexityViolation { min_eig: f64 },

    #[error("decomposition failed: pivot {pivot:.3e} below tolerance")]
    Decomposition { pivot: f64 },
}

impl CensusError {
    pub fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CensusError::Parse { path: path.into(), msg: msg.into() }
    }

    /// True for errors caused by bad input documents or arguments rather than
    /// numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CensusError::Parse { .. }
                | CensusError::Validation(_)
                | CensusError::Precondition(_)
                | CensusError::Unsupported(_)
                | CensusError::Range(_)
                | CensusError::IdentityClass
                | CensusError::NotPositiveOnCone { .. }
                | CensusError::InvalidI { .. }
        )
    }
}
