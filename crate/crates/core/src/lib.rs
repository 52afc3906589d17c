//! Geodesic landmarking toolkit for binary volumes.
//!
//! The crate covers the non-learned parts of a segmentation and landmarking
//! pipeline for the mandible: exact distance transforms, geodesic landmark
//! maps with min-fusion and quantization, landmark decoding, sagittal
//! boundary sequences for closely-spaced landmarks, post-processing,
//! evaluation metrics, architecture ledgers, and a synthetic phantom.

pub mod edt;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod landmark;
pub mod metrics;
pub mod netspec;
pub mod phantom;
pub mod postprocess;
pub mod seqlmk;
pub mod volume;

pub use error::{Error, Result};
pub use landmark::{Landmark, LandmarkName, LandmarkSet};
pub use volume::{BinaryMask, Connectivity, Coord, DType, Dims, Spacing, Volume};
