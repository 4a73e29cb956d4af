//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VlasovError {
    /// Invalid configuration (bad dimensions, mismatched kernel specs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input data (negative densities, mismatched run identities, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Kernel evaluated at its singular point.
    #[error("singular kernel evaluation: {0}")]
    Singularity(String),

    /// Non-finite state or a step-size rejection during time integration.
    #[error("numerical fault: {0}")]
    Numerics(String),

    /// Data left the representable range of a grid.
    #[error("grid range exceeded: {0}")]
    GridRange(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents (config files, snapshots).
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, VlasovError>;

impl VlasovError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            VlasovError::Config(_) | VlasovError::Input(_) | VlasovError::Format(_) => 2,
            VlasovError::Singularity(_) | VlasovError::Numerics(_) | VlasovError::GridRange(_) => 3,
            VlasovError::Io(_) => 4,
        }
    }
}
