use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension too small: need d >= {required}, got {got}")]
    DimensionTooSmall { required: usize, got: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: String },

    #[error("unsupported IDX magic 0x{0:08x}")]
    UnsupportedMagic(u32),

    #[error("truncated IDX payload: header declares {expected} bytes, found {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("IDX dimension product overflows usize")]
    DimensionOverflow,

    #[error("bad file format ({0})")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trace step mismatch: network and linear traces were not recorded at identical steps")]
    StepMismatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
