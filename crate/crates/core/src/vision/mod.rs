//! Desk-scale vision forward path: patch embedding, a small pre-norm
//! transformer, pixel-shuffle token compression, MLP projection into the
//! language width, and prompt-sequence assembly.
//!
//! The geometry matches the production contract (448x448 tiles, 32x32 patch
//! grid, 256 visual tokens per tile after a 2x2 shuffle) while the widths
//! stay small enough to run everywhere. Weights are seeded noise; what this
//! module guarantees is shapes, budgets, determinism, and calculus, not
//! learned behavior.

mod math;
pub mod model;
pub mod sequence;
pub mod shuffle;
pub mod trace;

pub use model::{encode_image, ModelConfig, VisionModel, VisualTokens, TILE_SIDE};
pub use sequence::{assemble_sequence, ChatTemplate, Segment, SegmentKind, TokenSequence};
pub use shuffle::{pixel_shuffle, pixel_unshuffle, PatchTokens};
pub use trace::{checksum_bytes, checksum_f64, forward_trace, verify_trace, ShapeTrace, TraceStage};
