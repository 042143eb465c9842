use thiserror::Error;

/// Errors produced by the numerical core, model code and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("parity error: {0}")]
    Parity(String),

    #[error("spectrum is not Hermitian-symmetric (max deviation {max_dev:e})")]
    NonHermitian { max_dev: f64 },

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("kernel dimension {m} exceeds grid dimension {n}")]
    KernelTooLarge { m: usize, n: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
