use thiserror::Error;

/// Every failure mode of the reduction chain and its oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{rows}x{cols} matrix exceeds the dense oracle cap of {cap}")]
    OracleCapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("entry ({row}, {col}) = {value} is not an integer")]
    NotIntegerMatrix { row: usize, col: usize, value: f64 },

    #[error("{what} {index} has no nonzero entries")]
    EmptyRowOrColumn { what: &'static str, index: usize },

    #[error("row {row} sums to {sum}, not zero")]
    NotZeroRowSum { row: usize, sum: f64 },

    #[error("row {row} violates the power-of-two class: {reason}")]
    NotGz2 { row: usize, reason: String },

    #[error("row {row}: {count} terms carry bit {round} (odd count cannot be paired)")]
    OddPairSet { row: usize, round: u32, count: usize },

    #[error("gadget block {block} collides with an endpoint")]
    BlockCollision { block: usize },

    #[error("not a 2-commodity system: {0}")]
    NotMc2(String),

    #[error("system is not strict: edge ({0}, {1}) lacks a row type")]
    NotStrict(usize, usize),

    #[error("row {row} has non-positive weight {weight}")]
    NonPositiveWeight { row: usize, weight: f64 },

    #[error("gadget at block {block} pairs vertices with equal height {height}")]
    DegeneratePairing { block: usize, height: f64 },

    #[error("pairing at block {block} shares bit {bit} on original vertex {vertex}")]
    BitCollision { block: usize, vertex: usize, bit: u64 },

    #[error("edge has non-positive weights ({w1}, {w2}, {w12})")]
    NonStrictEdge { w1: f64, w2: f64, w12: f64 },

    #[error("iteration cap {cap} reached with relative normal residual {residual:e}")]
    MaxIterationsExceeded { cap: usize, residual: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
