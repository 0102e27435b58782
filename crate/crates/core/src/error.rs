use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Byte stream does not follow the tensor container layout.
    Format(String),
    /// Payload shorter than the header promises.
    Length { needed: usize, available: usize },
    /// A NaN or infinity at the given flat index.
    NonFinite { index: usize },
    /// Shape or dimension mismatch.
    Shape(String),
    /// A metric denominator or basis collapsed.
    Degenerate(String),
    /// An argument outside its documented domain.
    InvalidArgument(String),
    /// A data structure invariant does not hold.
    Invariant(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Prefix the message with some context, e.g. a layer name.
    pub fn context(self, ctx: &str) -> Self {
        use alloc::format;
        match self {
            Error::Format(m) => Error::Format(format!("{ctx}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
            Error::Invariant(m) => Error::Invariant(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Length { needed, available } => write!(
                f,
                "length error: payload needs {needed} bytes, {available} available"
            ),
            Error::NonFinite { index } => write!(f, "non-finite value at flat index {index}"),
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate layer: {m}"),
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
