use std::path::PathBuf;

use crate::volume::{Coord, Dims};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("coordinate {coord:?} is outside volume dims {dims}")]
    OutOfDomain { coord: [i64; 3], dims: Dims },

    #[error("dimension mismatch: {left} vs {right}")]
    DimsMismatch { left: Dims, right: Dims },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("mask value {value} at flat index {index} is not 0 or 1")]
    InvalidMask { index: usize, value: String },

    #[error("mask has no foreground voxels")]
    EmptyForeground,

    #[error("landmark {landmark} at {voxel:?} is {distance_mm:.3} mm from the mask (limit {limit_mm} mm)")]
    SnapTooFar {
        landmark: String,
        voxel: Coord,
        distance_mm: f64,
        limit_mm: f64,
    },

    #[error("region {region} has two candidates: {first:?} and {second:?}")]
    RegionConflict {
        region: &'static str,
        first: Coord,
        second: Coord,
    },

    #[error("found {found} minimum clusters but only {expected} landmark names were expected")]
    TooManyClusters { found: usize, expected: usize },

    #[error("candidate at {voxel:?} falls in region {region}, which has no expected landmark")]
    UnexpectedRegion { region: &'static str, voxel: Coord },

    #[error("landmark {0} cannot be decoded from a fused map (only Me, CdL, CdR, CorL, CorR)")]
    NotSparse(String),

    #[error("landmark {0} is required but absent")]
    MissingLandmark(String),

    #[error("sagittal slice x={0} has no foreground")]
    EmptySlice(usize),

    #[error("landmarks {first} and {second} collapse onto boundary row {row}")]
    RowCollision {
        first: String,
        second: String,
        row: usize,
    },

    #[error("label vector has no flagged rows")]
    NoFlaggedRows,

    #[error("invalid boundary sequence: {0}")]
    InvalidSequence(String),

    #[error("no landmark names in common between prediction and ground truth")]
    NoCommonLandmarks,

    #[error("invalid argument `{field}`: {message}")]
    InvalidArgument { field: String, message: String },

    #[error("unknown landmark name {name:?}{}", suggestion.map(|s| format!(" (did you mean {s:?}?)")).unwrap_or_default())]
    UnknownLandmark {
        name: String,
        suggestion: Option<&'static str>,
    },

    #[error("duplicate landmark {field} {value}")]
    DuplicateLandmark { field: &'static str, value: String },

    #[error("label {id} forms {clusters} disconnected clusters")]
    DisconnectedLabel { id: i64, clusters: usize },

    #[error("header field `{field}`: {message}")]
    Header { field: String, message: String },

    #[error("payload length mismatch: header implies {expected} bytes, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by bad input rather than an environment failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn header(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Header {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
