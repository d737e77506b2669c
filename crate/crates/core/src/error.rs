use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown potential family `{0}`")]
    UnknownPotential(String),

    #[error("potential {family} evaluated outside its domain at s = {value}")]
    Domain { family: String, value: f64 },

    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("time step {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("field support reached r = {radius} at t = {t} (outer boundary guard at {guard})")]
    SupportOverflow { t: f64, radius: f64, guard: f64 },

    #[error("non-finite field value at t = {t}, r = {r}")]
    NonFinite { t: f64, r: f64 },

    #[error("potential {family} audits as {found}, which does not satisfy the {protocol} hypotheses")]
    AuditMismatch {
        family: String,
        found: String,
        protocol: String,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures raised while integrating (as opposed to bad input).
    pub fn is_abort(&self) -> bool {
        matches!(
            self,
            Error::SupportOverflow { .. } | Error::NonFinite { .. } | Error::Domain { .. }
        )
    }
}
