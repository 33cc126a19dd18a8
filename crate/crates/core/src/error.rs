use thiserror::Error;

/// Errors raised by the approximation library and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameters outside the domain of an operation, e.g. `q < d`.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid, degree set or matrix would exceed the configured cap.
    #[error("{what} of size {size} exceeds the cap of {cap}")]
    Size {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    /// NaN or infinity in solver input.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A user-supplied oracle failed.
    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_qd(q: usize, d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::Domain(format!(
            "dimension must be at least 1, got {d}"
        )));
    }
    if q < d {
        return Err(Error::Domain(format!(
            "resolution q = {q} is below the dimension d = {d}"
        )));
    }
    Ok(())
}
