//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The requested time step does not give an integer cell count on some arc.
    #[error("incompatible grid on arc {arc}: L/(2k\u{3bb}) = {ratio} is not an integer (deviation {deviation:.3e}); adjust k")]
    IncompatibleGrid { arc: u32, ratio: f64, deviation: f64 },

    /// Solution left the finite / bounded regime.
    #[error("blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    /// Banded LU hit a zero pivot.
    #[error("singular linear system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    /// Internal index-map inconsistency while building the global phi system.
    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    /// Structural problem that prevents building a network at all
    /// (validation findings are reported separately, see `ValidationReport`).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot parse error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
