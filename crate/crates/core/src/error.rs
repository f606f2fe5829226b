use std::fmt;

/// Families named in domain errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Binomial,
    Poisson,
    Gamma,
    Power,
    Multinomial,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FamilyKind::Binomial => "binomial",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Gamma => "gamma",
            FamilyKind::Power => "power",
            FamilyKind::Multinomial => "multinomial",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{family}: {message}")]
    Domain { family: FamilyKind, message: String },

    #[error("need more observations than parameters (n = {n}, p = {p})")]
    DegreesOfFreedom { n: usize, p: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("design matrix: {0}")]
    Design(String),

    #[error("optimization did not converge: {message}")]
    Optimization { message: String, trace: Vec<f64> },

    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown scenario `{name}` (expected one of: {known})")]
    Scenario { name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(family: FamilyKind, message: impl Into<String>) -> Self {
        Error::Domain {
            family,
            message: message.into(),
        }
    }
}
