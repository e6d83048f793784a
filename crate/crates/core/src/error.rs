use thiserror::Error;

use crate::fock::ModeLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {0} is not part of the register")]
    UnknownMode(ModeLabel),

    #[error("register mismatch: {0}")]
    RegisterMismatch(String),

    #[error("invalid register: {0}")]
    InvalidRegister(String),

    #[error("a two-mode element needs distinct modes, got {0} twice")]
    IdenticalModes(ModeLabel),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cutoff {cutoff} on mode {mode} leaves tail mass {tail:.3e} (epsilon {epsilon:.1e})")]
    CutoffExceeded {
        mode: ModeLabel,
        cutoff: usize,
        tail: f64,
        epsilon: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("run did not converge: norm deficit {norm_deficit:.3e} exceeds {limit:.1e}")]
    NotConverged { norm_deficit: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, echoed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownMode(_) | Error::RegisterMismatch(_) | Error::InvalidRegister(_) => {
                "E_REGISTER"
            }
            Error::IdenticalModes(_) | Error::InvalidPartition(_) | Error::InvalidParameter(_) => {
                "E_ARGUMENT"
            }
            Error::CutoffExceeded { .. } => "E_CUTOFF",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Contract(_) => "E_CONTRACT",
            Error::Config(_) => "E_CONFIG",
            Error::NotConverged { .. } => "E_NOT_CONVERGED",
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => "E_IO",
        }
    }

    /// Process exit status for the CLI; distinct per error class.
    pub fn exit_status(&self) -> i32 {
        match self.code() {
            "E_CONFIG" => 2,
            "E_CUTOFF" => 3,
            "E_CONTRACT" => 4,
            "E_NOT_CONVERGED" => 5,
            "E_IO" => 6,
            "E_REGISTER" => 7,
            "E_ARGUMENT" => 8,
            "E_DEGENERATE" => 9,
            _ => 1,
        }
    }
}
