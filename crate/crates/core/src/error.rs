use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the library.
///
/// Variants are grouped by how a caller should react: bad input, a failed
/// computation, or a method whose preconditions do not hold.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{total} assignments exceed the enumeration cap of {cap}")]
    CapExceeded { total: String, cap: u64 },

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    #[error("statistic `{statistic}` is not certified monotone in theta; inversion is not guaranteed")]
    NotMonotone { statistic: String },

    #[error("could not bracket the breakpoint for assignment {index}: {reason}")]
    BracketingFailed { index: usize, reason: String },

    #[error("breakpoint self-check failed for assignment {index}: closed form {closed_form}, bisection {bisection}")]
    SelfCheckFailed {
        index: usize,
        closed_form: f64,
        bisection: f64,
    },

    #[error("levels too high: lower endpoint {lower} exceeds upper endpoint {upper}")]
    LevelTooHigh { lower: f64, upper: f64 },

    #[error("combiner `{0}` has no reference CDF")]
    MissingReferenceCdf(String),

    #[error("p-value functions have different sides")]
    SideMismatch,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidDesign(_)
            | Error::LengthMismatch { .. }
            | Error::InvalidData(_)
            | Error::InvalidArgument(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Input,
            Error::NotMonotone { .. } | Error::MissingReferenceCdf(_) => ErrorKind::Precondition,
            Error::Replication { source, .. } => source.kind(),
            _ => ErrorKind::Computation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Computation,
    Precondition,
}
