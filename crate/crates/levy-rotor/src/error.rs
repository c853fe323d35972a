//! Crate-wide error type and exit-code mapping.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request exceeds a configured capability bound (e.g. maximum Bessel order).
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// Invalid or inconsistent run configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A numerical contract was violated (non-convergence, broken normalization, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The momentum lattice lacks headroom for the next kick. The caller is
    /// expected to grow the lattice and retry; nothing has been modified.
    #[error("lattice growth required: need {needed} free sites per side")]
    GrowthRequired { needed: usize },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 IO, 4 numerical/domain/capability.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 3,
            Error::Domain(_)
            | Error::Capability(_)
            | Error::Numerical(_)
            | Error::GrowthRequired { .. } => 4,
        }
    }
}
