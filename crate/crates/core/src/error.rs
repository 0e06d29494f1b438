use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters OA({n},{k},{s},{t}): {reason}")]
    InvalidParams {
        n: usize,
        k: usize,
        s: usize,
        t: usize,
        reason: &'static str,
    },

    #[error("design shape mismatch: {0}")]
    Shape(String),

    #[error("level {level} out of range for s = {s}")]
    LevelOutOfRange { level: usize, s: usize },

    #[error("J-characteristics require two-level designs (got s = {0})")]
    UnsupportedLevels(usize),

    #[error("J-spectrum is missing subsets of size {0}")]
    IncompleteSpectrum(usize),

    #[error("distribution yields a negative GWP entry at index {0}")]
    NegativeGwp(usize),

    #[error("GWP does not invert to an integral distance distribution at index {0}")]
    NotIntegral(usize),

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("malformed binary expansion at row {row}, factor {factor}")]
    MalformedExpansion { row: usize, factor: usize },

    #[error("bit columns {0} and {1} belong to the same factor block")]
    SameFactorBlock(usize, usize),

    #[error("directed constraints need s = 2 and odd index (got s = {s}, lambda = {lambda})")]
    DirectedUnsupported { s: usize, lambda: usize },

    #[error("k = {k} lies outside the recursion chain [{lo}, {hi}]")]
    OutOfChain { k: usize, lo: usize, hi: usize },

    #[error("projection size {k} must be smaller than parent width {parent}")]
    BadProjection { k: usize, parent: usize },

    #[error("checkpoint corrupt: {0}")]
    CheckpointCorrupt(String),

    #[error("budget exhausted after completing k = {completed_k}")]
    BudgetExceeded { completed_k: usize },

    #[error("parse error{}: {msg}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("matrix of order {0} is not Hadamard (H H^T != N I)")]
    NotHadamard(usize),

    #[error("catalog row {row} invalid: {msg}")]
    CatalogRowInvalid { row: String, msg: String },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
