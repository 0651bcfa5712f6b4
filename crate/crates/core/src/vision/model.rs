//! Desk-scale vision encoder and projector.
//!
//! The forward path mirrors the production shape contract (448x448 tile ->
//! patch tokens -> transformer -> pixel shuffle -> MLP projection -> 256
//! visual tokens per tile) at toy dimensions. Weights are seeded uniform
//! noise: the module verifies geometry, determinism, and calculus, not
//! learned representations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, PixelTensor, CHANNELS};
use crate::tiling::Plan;
use crate::vision::math::{self, Mat};
use crate::vision::shuffle::{pixel_shuffle, PatchTokens};

/// Side length of the square tile every view is resized to.
pub const TILE_SIDE: u32 = crate::tiling::DEFAULT_TILE_SIZE;

/// Encoder and projector geometry plus the weight seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Square patch edge in pixels; must divide 448.
    pub patch_size: u32,
    /// Transformer width.
    pub vit_dim: usize,
    /// Number of pre-norm transformer blocks.
    pub vit_layers: usize,
    /// Attention heads; must divide `vit_dim`.
    pub vit_heads: usize,
    /// Projected (language-model) width.
    pub llm_dim: usize,
    /// Spatial downscale factor of the shuffle is `1/shuffle_block`.
    pub shuffle_block: usize,
    /// Seed for deterministic weight initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            patch_size: 14,
            vit_dim: 64,
            vit_layers: 2,
            vit_heads: 4,
            llm_dim: 128,
            shuffle_block: 2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Patch-grid edge: `448 / patch_size`.
    pub fn grid_side(&self) -> usize {
        (TILE_SIDE / self.patch_size) as usize
    }

    /// Token width after the shuffle: `vit_dim * shuffle_block^2`.
    pub fn shuffled_dim(&self) -> usize {
        self.vit_dim * self.shuffle_block * self.shuffle_block
    }

    /// Visual tokens one tile produces after shuffle.
    pub fn tokens_per_tile(&self) -> usize {
        let side = self.grid_side() / self.shuffle_block;
        side * side
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || !TILE_SIDE.is_multiple_of(self.patch_size) {
            return Err(Error::arg(format!(
                "patch_size {} must divide tile side {TILE_SIDE}",
                self.patch_size
            )));
        }
        if self.vit_dim == 0 || self.llm_dim == 0 {
            return Err(Error::arg("model dims must be positive"));
        }
        if self.vit_heads == 0 || !self.vit_dim.is_multiple_of(self.vit_heads) {
            return Err(Error::arg(format!(
                "vit_dim {} must be divisible by vit_heads {}",
                self.vit_dim, self.vit_heads
            )));
        }
        if self.shuffle_block == 0 || !self.grid_side().is_multiple_of(self.shuffle_block) {
            return Err(Error::arg(format!(
                "shuffle block {} must divide patch grid side {}",
                self.shuffle_block,
                self.grid_side()
            )));
        }
        Ok(())
    }
}

/// Projected token block handed to the language side: `num_tokens` rows of
/// `dim` floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualTokens {
    pub num_tokens: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

struct Block {
    ln1_gamma: Vec<f64>,
    ln1_beta: Vec<f64>,
    wq: Mat,
    bq: Vec<f64>,
    wk: Mat,
    bk: Vec<f64>,
    wv: Mat,
    bv: Vec<f64>,
    wo: Mat,
    bo: Vec<f64>,
    ln2_gamma: Vec<f64>,
    ln2_beta: Vec<f64>,
    mlp_w1: Mat,
    mlp_b1: Vec<f64>,
    mlp_w2: Mat,
    mlp_b2: Vec<f64>,
}

/// Immutable model weights. Construction draws every parameter from a
/// seeded ChaCha8 stream in a fixed order, so equal configs give equal
/// weights on every platform. Forward calls are pure; the model is safe to
/// share across threads.
pub struct VisionModel {
    cfg: ModelConfig,
    patch_w: Mat,
    patch_b: Vec<f64>,
    blocks: Vec<Block>,
    proj_w1: Mat,
    proj_b1: Vec<f64>,
    proj_w2: Mat,
    proj_b2: Vec<f64>,
}

/// Uniform(-0.02, 0.02) draw; the affine map keeps the distribution pinned
/// to the raw ChaCha8 stream.
fn draw(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>() * 0.04 - 0.02
}

fn draw_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| draw(rng)).collect())
}

fn draw_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| draw(rng)).collect()
}

impl VisionModel {
    /// Builds the model, drawing weights in a fixed order: patch embedding
    /// (matrix then bias), then per block Q, K, V, O (matrix then bias each),
    /// MLP in, MLP out, then the projector's two layers. Layer-norm scales
    /// start at 1 and shifts at 0 and are not drawn.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let patch_dim = (cfg.patch_size * cfg.patch_size) as usize * CHANNELS;
        let d = cfg.vit_dim;
        let hidden = 4 * d;

        let patch_w = draw_mat(&mut rng, patch_dim, d);
        let patch_b = draw_vec(&mut rng, d);

        let mut blocks = Vec::with_capacity(cfg.vit_layers);
        for _ in 0..cfg.vit_layers {
            blocks.push(Block {
                ln1_gamma: vec![1.0; d],
                ln1_beta: vec![0.0; d],
                wq: draw_mat(&mut rng, d, d),
                bq: draw_vec(&mut rng, d),
                wk: draw_mat(&mut rng, d, d),
                bk: draw_vec(&mut rng, d),
                wv: draw_mat(&mut rng, d, d),
                bv: draw_vec(&mut rng, d),
                wo: draw_mat(&mut rng, d, d),
                bo: draw_vec(&mut rng, d),
                ln2_gamma: vec![1.0; d],
                ln2_beta: vec![0.0; d],
                mlp_w1: draw_mat(&mut rng, d, hidden),
                mlp_b1: draw_vec(&mut rng, hidden),
                mlp_w2: draw_mat(&mut rng, hidden, d),
                mlp_b2: draw_vec(&mut rng, d),
            });
        }

        let shuffled = cfg.shuffled_dim();
        let proj_w1 = draw_mat(&mut rng, shuffled, cfg.llm_dim);
        let proj_b1 = draw_vec(&mut rng, cfg.llm_dim);
        let proj_w2 = draw_mat(&mut rng, cfg.llm_dim, cfg.llm_dim);
        let proj_b2 = draw_vec(&mut rng, cfg.llm_dim);

        Ok(Self {
            cfg,
            patch_w,
            patch_b,
            blocks,
            proj_w1,
            proj_b1,
            proj_w2,
            proj_b2,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Splits a normalized 448x448 tile into non-overlapping patches and
    /// embeds each linearly. Patch pixels flatten row-major with interleaved
    /// channels. No position embedding: a constant tile yields identical
    /// rows (the bias row when the tile is zero).
    pub fn patch_embed(&self, tile: &PixelTensor) -> Result<PatchTokens> {
        if tile.width() != TILE_SIDE || tile.height() != TILE_SIDE {
            return Err(Error::arg(format!(
                "expected {TILE_SIDE}x{TILE_SIDE} tile, got {}x{}",
                tile.width(),
                tile.height()
            )));
        }
        let p = self.cfg.patch_size as usize;
        let side = self.cfg.grid_side();
        let patch_dim = p * p * CHANNELS;

        let mut patches = Mat::zeros(side * side, patch_dim);
        for gr in 0..side {
            for gc in 0..side {
                let row = gr * side + gc;
                let mut i = 0;
                for py in 0..p {
                    for px in 0..p {
                        for ch in 0..CHANNELS {
                            patches.set(
                                row,
                                i,
                                tile.sample((gc * p + px) as u32, (gr * p + py) as u32, ch),
                            );
                            i += 1;
                        }
                    }
                }
            }
        }
        let mut embedded = patches.matmul(&self.patch_w);
        embedded.add_row_bias(&self.patch_b);
        PatchTokens::new(side, side, self.cfg.vit_dim, embedded.data)
    }

    /// Runs the pre-norm transformer stack:
    /// `x += attn(ln1(x)); x += mlp(ln2(x))` per block. Zero blocks is the
    /// identity.
    pub fn vit_forward(&self, tokens: &PatchTokens) -> Result<PatchTokens> {
        if tokens.dim != self.cfg.vit_dim {
            return Err(Error::arg(format!(
                "token dim {} does not match vit_dim {}",
                tokens.dim, self.cfg.vit_dim
            )));
        }
        let n = tokens.num_tokens();
        let mut x = Mat::from_vec(n, tokens.dim, tokens.data.clone());
        for block in &self.blocks {
            let normed = math::layer_norm(&x, &block.ln1_gamma, &block.ln1_beta);
            x.add(&self.attention(&normed, block));
            let normed = math::layer_norm(&x, &block.ln2_gamma, &block.ln2_beta);
            x.add(&Self::mlp(&normed, block));
        }
        PatchTokens::new(tokens.grid_h, tokens.grid_w, tokens.dim, x.data)
    }

    fn attention(&self, x: &Mat, block: &Block) -> Mat {
        let n = x.rows;
        let d = self.cfg.vit_dim;
        let heads = self.cfg.vit_heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();

        let mut q = x.matmul(&block.wq);
        q.add_row_bias(&block.bq);
        let mut k = x.matmul(&block.wk);
        k.add_row_bias(&block.bk);
        let mut v = x.matmul(&block.wv);
        v.add_row_bias(&block.bv);

        let mut merged = Mat::zeros(n, d);
        for h in 0..heads {
            let off = h * hd;
            let mut scores = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for c in 0..hd {
                        acc += q.at(i, off + c) * k.at(j, off + c);
                    }
                    scores.set(i, j, acc * scale);
                }
            }
            math::softmax_rows(&mut scores);
            for i in 0..n {
                for c in 0..hd {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += scores.at(i, j) * v.at(j, off + c);
                    }
                    merged.set(i, off + c, acc);
                }
            }
        }
        let mut out = merged.matmul(&block.wo);
        out.add_row_bias(&block.bo);
        out
    }

    fn mlp(x: &Mat, block: &Block) -> Mat {
        let mut h = x.matmul(&block.mlp_w1);
        h.add_row_bias(&block.mlp_b1);
        let h = h.map(math::gelu);
        let mut out = h.matmul(&block.mlp_w2);
        out.add_row_bias(&block.mlp_b2);
        out
    }

    /// Two-layer MLP bridge to the language width: `gelu(x W1 + b1) W2 + b2`.
    /// Token count is unchanged.
    pub fn project(&self, tokens: &PatchTokens) -> Result<VisualTokens> {
        if tokens.dim != self.cfg.shuffled_dim() {
            return Err(Error::arg(format!(
                "token dim {} does not match projector input {}",
                tokens.dim,
                self.cfg.shuffled_dim()
            )));
        }
        let x = Mat::from_vec(tokens.num_tokens(), tokens.dim, tokens.data.clone());
        let y = self.project_mat(&x);
        Ok(VisualTokens {
            num_tokens: tokens.num_tokens(),
            dim: self.cfg.llm_dim,
            data: y.data,
        })
    }

    fn project_mat(&self, x: &Mat) -> Mat {
        let mut h = x.matmul(&self.proj_w1);
        h.add_row_bias(&self.proj_b1);
        let h = h.map(math::gelu);
        let mut y = h.matmul(&self.proj_w2);
        y.add_row_bias(&self.proj_b2);
        y
    }

    /// Jacobian-vector product of [`Self::project`]: the directional
    /// derivative of the output along input perturbation `dx`, from the
    /// chain rule `dy = ((dx W1) * gelu'(x W1 + b1)) W2`.
    ///
    /// Returns `(project(x), dy)` with both flattened row-major. `x` and
    /// `dx` are `num_tokens` x `shuffled_dim`.
    pub fn project_jvp(
        &self,
        num_tokens: usize,
        x: &[f64],
        dx: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let in_dim = self.cfg.shuffled_dim();
        if x.len() != num_tokens * in_dim || dx.len() != x.len() {
            return Err(Error::arg(format!(
                "jvp input length {} does not match {num_tokens}x{in_dim}",
                x.len()
            )));
        }
        let xm = Mat::from_vec(num_tokens, in_dim, x.to_vec());
        let dxm = Mat::from_vec(num_tokens, in_dim, dx.to_vec());

        let mut h = xm.matmul(&self.proj_w1);
        h.add_row_bias(&self.proj_b1);
        let dh = dxm.matmul(&self.proj_w1);

        let act = h.map(math::gelu);
        let mut dact = Mat::zeros(h.rows, h.cols);
        for i in 0..h.data.len() {
            dact.data[i] = math::gelu_prime(h.data[i]) * dh.data[i];
        }

        let mut y = act.matmul(&self.proj_w2);
        y.add_row_bias(&self.proj_b2);
        let dy = dact.matmul(&self.proj_w2);
        Ok((y.data, dy.data))
    }

    /// Full per-tile path: normalize, patch-embed, encode, shuffle, project.
    pub fn encode_tile(&self, tile: &raster::ImageBuffer) -> Result<VisualTokens> {
        let tensor = raster::normalize(tile, raster::DEFAULT_MEAN, raster::DEFAULT_STD)?;
        let tokens = self.patch_embed(&tensor)?;
        let tokens = self.vit_forward(&tokens)?;
        let tokens = pixel_shuffle(&tokens, self.cfg.shuffle_block)?;
        self.project(&tokens)
    }
}

/// Encodes every view of a plan in plan order: one
/// [`ModelConfig::tokens_per_tile`] block per view, thumbnail included.
pub fn encode_image(
    model: &VisionModel,
    img: &raster::ImageBuffer,
    plan: &Plan,
) -> Result<Vec<VisualTokens>> {
    if plan.tile_size() != TILE_SIDE {
        return Err(Error::arg(format!(
            "plan tile size {} does not match model tile side {TILE_SIDE}",
            plan.tile_size()
        )));
    }
    plan.extract_views(img)?
        .iter()
        .map(|view| model.encode_tile(view))
        .collect()
}
