use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{qubits} qubits exceeds the {cap}-qubit limit for {what}; use the symmetric-sector path")]
    CapExceeded {
        qubits: usize,
        cap: usize,
        what: &'static str,
    },

    #[error("invalid catalyst: {0}")]
    InvalidCatalyst(String),

    #[error("schedule parameter s = {0} is outside [0, 1]")]
    ScheduleOutOfRange(f64),

    #[error("operator is not symmetric (max |M - M^T| = {0:e})")]
    NotSymmetric(f64),

    #[error("not supported in sector mode: {0}")]
    SectorUnsupported(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("near-degenerate level: {0}")]
    Degenerate(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by the request itself rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstance(_)
                | Error::CapExceeded { .. }
                | Error::InvalidCatalyst(_)
                | Error::ScheduleOutOfRange(_)
                | Error::SectorUnsupported(_)
                | Error::InvalidGrid(_)
                | Error::Config(_)
        )
    }
}
