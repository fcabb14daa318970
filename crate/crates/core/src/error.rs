use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Document does not match the expected shape; `path` points at the offending field.
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("{0}")]
    Domain(String),

    #[error("infeasible split: {0}")]
    Infeasible(String),

    #[error("not an extension: {0}")]
    NotExtension(String),

    #[error("scale cap exceeded: {what} is {needed}, cap is {cap}; use the FPTAS (--method fptas) instead")]
    ScaleCap { what: String, needed: String, cap: u64 },

    #[error("enumeration cap exceeded: {0}")]
    EnumerationCap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), msg: msg.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::Domain(_) => "domain",
            Error::Infeasible(_) => "infeasible",
            Error::NotExtension(_) => "not-an-extension",
            Error::ScaleCap { .. } => "scale-cap",
            Error::EnumerationCap(_) => "enumeration-cap",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
