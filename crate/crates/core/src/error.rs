use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter value makes the requested quantity undefined
    /// (zero slope, zero width, zero intensity coefficient).
    #[error("singular parameter: {0}")]
    SingularParameter(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no solution: requested {requested}, achievable range [{min}, {max}]")]
    NoSolution { requested: f64, min: f64, max: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::SingularParameter(msg.into())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "{name} must be finite, got {value}"
        )))
    }
}
