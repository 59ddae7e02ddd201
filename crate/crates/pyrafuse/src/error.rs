//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // image loading
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image: {0}")]
    CorruptImage(PathBuf),

    // pixel-level ops
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid hysteresis thresholds: low={low}, high={high} (need 0 <= low < high <= 1)")]
    InvalidThresholds { low: f64, high: f64 },

    // pyramid
    #[error("image {width}x{height} too small for pyramid level {level}")]
    ImageTooSmallForLevel { width: usize, height: usize, level: u32 },
    #[error("level {level} out of range for highest level {highest}")]
    LevelOutOfRange { level: u32, highest: u32 },

    // dense sift
    #[error("patch at ({x},{y}) side {patch} out of bounds for {width}x{height}")]
    PatchOutOfBounds { x: usize, y: usize, patch: usize, width: usize, height: usize },
    #[error("no patches fit in {width}x{height} image")]
    NoPatchesFit { width: usize, height: usize },

    // codebook
    #[error("need {requested} distinct points for seeding, found only {distinct}")]
    NotEnoughDistinctPoints { requested: usize, distinct: usize },

    // svm
    #[error("training set contains a single class")]
    SingleClassInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    TooFewSamplesPerClass { class: String, count: usize, folds: usize },

    // fusion
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("probability vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    // dataset / pipeline
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("class {class} has only {count} images, need at least {need}")]
    TooFewImages { class: String, count: usize, need: usize },
    #[error("found {0} classes, need at least 2")]
    TooFewClasses(usize),
    #[error("model classes do not match dataset classes: {0}")]
    ClassMismatch(String),

    // context wrapper so pipeline errors name the offending image
    #[error("while processing {path}: {source}")]
    AtImage { path: PathBuf, source: Box<Error> },

    // persistence
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic in {0}: not a model file")]
    BadMagic(PathBuf),
    #[error("unsupported model format version {version} in {path}")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("checksum mismatch in {0}: file corrupt or truncated")]
    ChecksumMismatch(PathBuf),
    #[error("model file {path} missing section {section}")]
    MissingSection { path: PathBuf, section: String },
}

pub type Result<T> = std::result::Result<T, Error>;
