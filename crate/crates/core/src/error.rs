use thiserror::Error;

/// Errors raised by the zone model, optimizer, simulator and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("dimension mismatch in `{what}`: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("class {class} is unstable: service margin {margin} is not positive")]
    Unstable { class: usize, margin: f64 },

    #[error("infeasible zone: fleet rate bound {bound} is not positive (vehicle supply cannot cover demand)")]
    InfeasibleZone { bound: f64 },

    #[error("no feasible point: {constraint}")]
    NoFeasiblePoint { constraint: String },

    #[error("hypothesis space of {size} active sets exceeds the cap of {cap}")]
    EnumerationTooLarge { size: usize, cap: usize },

    #[error("brute-force oracle supports at most {max} free variables, got {free}")]
    OracleGuard { free: usize, max: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. }
                | Error::DimensionMismatch { .. }
                | Error::EnumerationTooLarge { .. }
                | Error::OracleGuard { .. }
        )
    }

    /// True when the zone itself admits no stable operating point.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleZone { .. } | Error::NoFeasiblePoint { .. } | Error::Unstable { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
