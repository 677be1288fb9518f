//! Compiled form of the book under `book/`.
//!
//! mdBook renders the chapters but cannot execute them; including each
//! chapter as module documentation makes every fenced Rust block a doctest,
//! so `cargo test -p guide --doc` keeps the book honest. A failing doctest
//! names its chapter module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/rasters.md")]
pub mod rasters {}

#[doc = include_str!("../../../book/src/colorspaces.md")]
pub mod colorspaces {}

#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}

#[doc = include_str!("../../../book/src/illumination.md")]
pub mod illumination {}

#[doc = include_str!("../../../book/src/conventional.md")]
pub mod conventional {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/homogeneity.md")]
pub mod homogeneity {}

#[doc = include_str!("../../../book/src/classifier.md")]
pub mod classifier {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
