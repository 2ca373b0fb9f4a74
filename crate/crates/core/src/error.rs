use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group width {0} outside supported range 1..=8")]
    InvalidWidth(u8),
    #[error("symbol value {value} does not fit in width {width}")]
    ValueOutOfRange { value: u16, width: u8 },
    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: u8, found: u8 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid map dimensions {rows}x{cols}: need 1 <= cols <= rows <= 8")]
    InvalidMapDims { rows: u8, cols: u8 },
    #[error("linear map is not full rank (rank {rank}, need {cols})")]
    RankDeficient { rank: usize, cols: u8 },
    #[error("undefined LDR vector: x_0 is zero")]
    ZeroReference,
    #[error("empty sample set")]
    EmptySamples,
    #[error("density conditionals disagree on support: {0}")]
    SupportMismatch(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("conditioning on a zero-probability slice: {0}")]
    ZeroSlice(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("unrealizable construction: {0}")]
    Unrealizable(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("matrix structure: {0}")]
    Structure(String),
    #[error("density evolution: {0}")]
    DensityEvolution(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
