//! Core library for a document-oriented vision-language input pipeline:
//! dynamic-resolution tiling with multi-scale adaptive cropping, a
//! deterministic desk-scale vision encoder with pixel-shuffle token
//! compression, training-mixture and stage-schedule tooling, and a
//! document-extraction evaluation harness.
//!
//! Everything is CPU-only, f64 where it matters, and deterministic: the same
//! inputs produce byte-identical artifacts on every run and platform.

pub mod error;
pub mod eval;
pub mod keyvalue;
pub mod manifest;
pub mod raster;
pub mod tiling;
pub mod vision;

pub use error::{Error, Result};
