use thiserror::Error;

/// Errors produced by the receive chain and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("variance must be positive")]
    NonPositiveVariance,
    #[error("bit stream length {len} is not a multiple of {bits_per_symbol}")]
    BitLengthMismatch { len: usize, bits_per_symbol: usize },
    #[error("bit index {q} out of range 1..={max}")]
    BitIndexOutOfRange { q: usize, max: usize },
    #[error("block length {0} is not a power of two")]
    BlockLengthNotPowerOfTwo(usize),
    #[error("length mismatch: expected {expected} elements, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty block")]
    EmptyBlock,
    #[error("degenerate equalizer state: filter normalization below threshold")]
    DegenerateEqualizer,
    #[error("degenerate table grid: need at least two points and 0 < min < max")]
    DegenerateGrid,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed vector file: {0}")]
    MalformedVectorFile(String),
    #[error("golden vector mismatch at row {row}")]
    GoldenMismatch { row: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
