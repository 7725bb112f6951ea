use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config field `{field}` = {value}: {reason}")]
    Config {
        field: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("image `{id}`: {reason}")]
    InvalidImage { id: String, reason: String },

    #[error("need at least {needed} point pairs, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),

    #[error("transform is not invertible")]
    NotInvertible,

    #[error("no RANSAC hypothesis reached the minimal inlier count")]
    NoConsensus,

    #[error("{}:{line}: {reason}", path.display())]
    MatchFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Sidecar {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("chain break: {0}")]
    ChainBreak(String),

    #[error("empty overlap between warped images")]
    EmptyOverlap,

    #[error("mosaic mask is empty")]
    EmptyMask,

    #[error("degenerate slice quadrilateral at x = {0}")]
    DegenerateSlice(usize),

    #[error("assembling batches {a} and {b}: {reason}")]
    Assembly { a: usize, b: usize, reason: String },

    #[error("georeference: {0}")]
    Georef(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
