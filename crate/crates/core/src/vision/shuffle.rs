//! Pixel shuffle: space-to-depth rearrangement of the patch-token grid.
//!
//! Merging each `block` x `block` neighborhood of tokens into one token of
//! `block^2 * dim` channels trades spatial resolution for depth. With the
//! default block of 2 a 32x32 ViT grid becomes 16x16 = 256 tokens per tile.
//! The rearrangement moves scalars without arithmetic, so it is exactly
//! invertible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spatial grid of token embeddings, row-major, `data[r * grid_w + c]`
/// holds token `(r, c)` as `dim` contiguous floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchTokens {
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PatchTokens {
    pub fn new(grid_h: usize, grid_w: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if grid_h == 0 || grid_w == 0 || dim == 0 {
            return Err(Error::arg(format!(
                "token grid must be non-empty, got {grid_h}x{grid_w}x{dim}"
            )));
        }
        if data.len() != grid_h * grid_w * dim {
            return Err(Error::arg(format!(
                "token data length {} does not match {grid_h}x{grid_w}x{dim}",
                data.len()
            )));
        }
        Ok(Self {
            grid_h,
            grid_w,
            dim,
            data,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    /// Token `(r, c)` as a slice of `dim` floats.
    pub fn token(&self, r: usize, c: usize) -> &[f64] {
        let start = (r * self.grid_w + c) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Space-to-depth by a factor of `block` per axis (spatial downscale ratio
/// `1/block`).
///
/// Output token `(r, c)` is the concatenation of input tokens
/// `(r*block + br, c*block + bc)` for `br, bc` in row-major order, so the
/// output grid is `(grid_h/block) x (grid_w/block)` with `dim * block^2`
/// channels. `block = 1` is the identity.
pub fn pixel_shuffle(tokens: &PatchTokens, block: usize) -> Result<PatchTokens> {
    if block == 0 {
        return Err(Error::arg("shuffle block must be at least 1"));
    }
    if !tokens.grid_h.is_multiple_of(block) || !tokens.grid_w.is_multiple_of(block) {
        return Err(Error::arg(format!(
            "grid {}x{} not divisible by shuffle block {block}",
            tokens.grid_h, tokens.grid_w
        )));
    }
    if block == 1 {
        return Ok(tokens.clone());
    }

    let out_h = tokens.grid_h / block;
    let out_w = tokens.grid_w / block;
    let out_dim = tokens.dim * block * block;
    let mut data = Vec::with_capacity(out_h * out_w * out_dim);
    for r in 0..out_h {
        for c in 0..out_w {
            for br in 0..block {
                for bc in 0..block {
                    data.extend_from_slice(tokens.token(r * block + br, c * block + bc));
                }
            }
        }
    }
    PatchTokens::new(out_h, out_w, out_dim, data)
}

/// Exact inverse of [`pixel_shuffle`] with the same `block`.
pub fn pixel_unshuffle(tokens: &PatchTokens, block: usize) -> Result<PatchTokens> {
    if block == 0 {
        return Err(Error::arg("shuffle block must be at least 1"));
    }
    if !tokens.dim.is_multiple_of(block * block) {
        return Err(Error::arg(format!(
            "token dim {} not divisible by block^2 = {}",
            tokens.dim,
            block * block
        )));
    }
    if block == 1 {
        return Ok(tokens.clone());
    }

    let out_h = tokens.grid_h * block;
    let out_w = tokens.grid_w * block;
    let out_dim = tokens.dim / (block * block);
    let mut data = vec![0.0; out_h * out_w * out_dim];
    for r in 0..tokens.grid_h {
        for c in 0..tokens.grid_w {
            let packed = tokens.token(r, c);
            for br in 0..block {
                for bc in 0..block {
                    let src = (br * block + bc) * out_dim;
                    let dst = ((r * block + br) * out_w + (c * block + bc)) * out_dim;
                    data[dst..dst + out_dim].copy_from_slice(&packed[src..src + out_dim]);
                }
            }
        }
    }
    PatchTokens::new(out_h, out_w, out_dim, data)
}
