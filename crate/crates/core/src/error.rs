use thiserror::Error;

/// Crate-level error type.
#[derive(Error, Debug)]
pub enum Error {
    /// A parameter lies outside the domain required by the chosen function.
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    /// An operation contract was violated (shape mismatch, missing box, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An object's core region contains no anchor center, or its box contains
    /// no anchor center at all.
    #[error("degenerate object: {0}")]
    DegenerateObject(String),

    /// A box with non-positive extent.
    #[error("degenerate box: w={w}, h={h}")]
    DegenerateBox { w: f64, h: f64 },

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    /// Malformed or incompatible serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }
}
