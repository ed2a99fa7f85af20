use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    /// Phase modulation pushed population into the outermost sidebands.
    #[error(
        "grid too small: population {population:.3e} in the top 5% of sidebands \
         exceeds {threshold:.0e} (n_samples = {n_samples})"
    )]
    GridTooSmall {
        population: f64,
        threshold: f64,
        n_samples: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
