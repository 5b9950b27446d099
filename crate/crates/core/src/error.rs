use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid dimensions: layers={layers}, packets_per_layer={packets}, payload_size={payload}")]
    InvalidDimensions {
        layers: usize,
        packets: usize,
        payload: usize,
    },

    #[error("data length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("strategy has {actual} classes but the grid has {expected} layers")]
    StrategyLength { expected: usize, actual: usize },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("packets from different GOPs ({first} and {other}) in one decode")]
    MixedGops { first: u64, other: u64 },

    #[error("packets with different coding schemes in one decode")]
    MixedSchemes,

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("granularity {granularity} does not divide budget {budget}")]
    Granularity { budget: u32, granularity: u32 },

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("brute-force evaluation over {0} transmissions exceeds the cap of {cap}", cap = crate::spt::BRUTE_FORCE_CAP)]
    BruteForceTooLarge(u32),

    #[error("inverse of zero in GF(2^8)")]
    ZeroInverse,

    #[error("unknown heuristic threshold set {0} (expected 1, 2 or 3)")]
    UnknownPolicy(u8),

    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("probe count must be at least 1")]
    NoProbes,

    #[error("node has no strategy table or policy")]
    MissingSelector,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("malformed table file at line {line}: {msg}")]
    TableFormat { line: usize, msg: String },

    #[error("unknown sweep mode {0:?}")]
    UnknownMode(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
