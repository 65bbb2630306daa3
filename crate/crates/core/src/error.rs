use thiserror::Error;

/// Errors produced by the PHY library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spreading factor {0} out of range (expected 6..=12)")]
    SpreadingFactor(u32),
    #[error("bandwidth {0} Hz not supported (expected 125000, 250000 or 500000)")]
    Bandwidth(u32),
    #[error("oversampling factor {0} out of range (expected 1..=64)")]
    Oversampling(u32),
    #[error("preamble needs at least 2 upchirps, got {0}")]
    PreambleLength(u32),
    #[error("symbol {value} out of range for SF {sf}")]
    SymbolOutOfRange { value: u32, sf: u32 },
    #[error("code rate {0} out of range (expected 1..=4)")]
    CodeRate(u32),
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("bit block of length {len} is not a multiple of {multiple}")]
    BitLength { len: usize, multiple: usize },
    #[error("not enough samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("fading coefficient must be nonzero")]
    ZeroFading,
    #[error("payload of {0} bytes does not fit the 8-bit length field")]
    PayloadTooLong(usize),
    #[error("header decode failed: {0}")]
    HeaderDecode(&'static str),
    #[error("no preamble found")]
    NoPreamble,
    #[error("sync word not found after preamble")]
    SyncWordNotFound,
    #[error("sweep has no SNR points")]
    EmptySweep,
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("config: {0}")]
    Config(String),
    #[error("IQ file: {0}")]
    IqFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
