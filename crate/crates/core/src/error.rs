use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("ridge is not in normal form")]
    NormalizationRequired,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("reduction undefined: {0}")]
    ReductionUndefined(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("surgery failed: {0}")]
    Surgery(String),

    #[error("locus does not divide the domain: {0}")]
    NonDividing(String),

    #[error("no convergence after {attempts} attempts: {reason}")]
    Convergence {
        attempts: usize,
        reason: String,
        loci: Vec<Vec<[f64; 2]>>,
    },

    #[error("inductive step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ball {ball}: {source}")]
    Ball {
        ball: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Innermost error after unwrapping step and ball context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } | Error::Ball { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(
            self.root(),
            Error::Convergence { .. } | Error::Surgery(_) | Error::NonDividing(_)
        )
    }

    pub fn is_parse(&self) -> bool {
        matches!(self.root(), Error::Json(_) | Error::Io(_))
    }
}
