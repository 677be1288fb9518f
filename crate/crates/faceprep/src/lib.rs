//! Preprocessing toolkit and benchmark harness for face-identification
//! pipelines.
//!
//! The crate covers the full path from a directory of face images to a
//! Top-1 accuracy table:
//!
//! * [`raster`] — the 8-bit image model, PNG/PPM/PGM codecs, bilinear
//!   resizing, and the `FPP1` float-tensor container.
//! * [`colorspace`] — RGB ↔ HSV / CIE L\*a\*b\* / YCbCr conversions with a
//!   fixed 8-bit re-encoding.
//! * [`quantize`] — grey-level reduction via multilevel Otsu thresholding,
//!   in full-image and per-plane modes.
//! * [`illum`] — histogram equalization and local contrast normalization.
//! * [`conventional`] — translation augmentation and dataset
//!   standardization (the WA/NA and WN/NN switches).
//! * [`dataset`] — manifest ingestion, class filtering, and deterministic
//!   stratified train/val/test splits.
//! * [`analysis`] — neighborhood-homogeneity and bit-depth metrics.
//! * [`classifier`] — a softmax classifier trained with Adam over pooled
//!   image features, with Top-1 evaluation.
//! * [`pipeline`] — config-driven stage composition, the augmentation ×
//!   normalization grid runner, and report rendering.
//!
//! See the book under `book/` for a guided tour; every snippet there is
//! compiled and run as a doctest.

pub mod analysis;
pub mod classifier;
pub mod colorspace;
pub mod conventional;
pub mod dataset;
pub mod illum;
pub mod pipeline;
pub mod quantize;
pub mod raster;
pub mod report;
pub mod synth;

pub use raster::{ColorSpace, ImageFormat, QuantMode, Raster8, TensorF32};
