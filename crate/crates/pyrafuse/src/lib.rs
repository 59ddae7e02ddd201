//! Image classification with complementary spatial-pyramid features.
//!
//! Three descriptors are extracted per image — PHOW (pyramid histogram of
//! visual words over dense SIFT), PHOC (pyramid HSV color histogram) and
//! PHOG (pyramid histogram of oriented gradients on contour edges) — each
//! feeding a one-vs-rest SVM. The per-classifier probability vectors are
//! combined by an adaptive weighted late fusion, where each feature's
//! weight is learned from its correct-recognition count on the training
//! set.
//!
//! The top-level entry points live in [`pipeline`]: dataset ingestion,
//! training, evaluation, classification and model persistence.

pub mod bundle;
pub mod codebook;
pub mod dense_sift;
pub mod error;
pub mod features;
pub mod fusion;
pub mod image_core;
pub mod pipeline;
pub mod pyramid;
pub mod svm;

pub use error::{Error, Result};
