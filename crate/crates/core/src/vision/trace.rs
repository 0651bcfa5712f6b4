//! Shape trace: a per-stage record of tensor dimensions and content
//! checksums for the full forward path, used for golden-file testing.
//!
//! Float checksums hash a fixed 6-significant-digit rendering rather than
//! raw bits, so the trace is stable across platforms whose libm entry
//! points differ in the last ulp.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::raster::{self, ImageBuffer};
use crate::tiling::Plan;
use crate::vision::model::VisionModel;
use crate::vision::sequence::{assemble_sequence, ChatTemplate};
use crate::vision::shuffle::pixel_shuffle;

/// One pipeline stage: dims of a single tile's tensor at that stage, the
/// number of tiles, and a checksum over the concatenated contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStage {
    pub stage: String,
    pub dims: Vec<usize>,
    pub tiles: usize,
    pub checksum: String,
}

/// Full forward-path trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTrace {
    pub schema_version: u32,
    pub stages: Vec<TraceStage>,
    pub total_visual_tokens: usize,
}

/// Hex SHA-256 over raw bytes.
pub fn checksum_bytes(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    format!("{:x}", hasher.finalize())
}

/// Hex SHA-256 over newline-joined `{:.6e}` renderings. Negative zero is
/// collapsed to zero so the rendering is sign-stable.
pub fn checksum_f64(data: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for &v in data {
        let v = if v == 0.0 { 0.0 } else { v };
        hasher.update(format!("{v:.6e}\n").as_bytes());
    }
    format!("{:x}", hasher.finalize())
}

/// Runs the full forward path over a plan and records every stage.
pub fn forward_trace(
    model: &VisionModel,
    img: &ImageBuffer,
    plan: &Plan,
    prompt: &str,
) -> Result<ShapeTrace> {
    let cfg = *model.config();
    let views = plan.extract_views(img)?;
    let tiles = views.len();

    let mut view_bytes = Vec::new();
    let mut embed_data = Vec::new();
    let mut encoded_data = Vec::new();
    let mut shuffled_data = Vec::new();
    let mut projected = Vec::new();
    for view in &views {
        view_bytes.extend_from_slice(view.data());
        let tensor = raster::normalize(view, raster::DEFAULT_MEAN, raster::DEFAULT_STD)?;
        let embedded = model.patch_embed(&tensor)?;
        embed_data.extend_from_slice(&embedded.data);
        let encoded = model.vit_forward(&embedded)?;
        encoded_data.extend_from_slice(&encoded.data);
        let shuffled = pixel_shuffle(&encoded, cfg.shuffle_block)?;
        shuffled_data.extend_from_slice(&shuffled.data);
        projected.push(model.project(&shuffled)?);
    }

    let side = cfg.grid_side();
    let shuffled_side = side / cfg.shuffle_block;
    let tile_px = crate::vision::model::TILE_SIDE as usize;
    let proj_data: Vec<f64> = projected.iter().flat_map(|b| b.data.clone()).collect();

    let sequence = assemble_sequence(&projected, prompt, &ChatTemplate::default())?;

    let stages = vec![
        TraceStage {
            stage: "views".to_string(),
            dims: vec![tile_px, tile_px, raster::CHANNELS],
            tiles,
            checksum: checksum_bytes(&view_bytes),
        },
        TraceStage {
            stage: "patch_embed".to_string(),
            dims: vec![side * side, cfg.vit_dim],
            tiles,
            checksum: checksum_f64(&embed_data),
        },
        TraceStage {
            stage: "encoder".to_string(),
            dims: vec![side * side, cfg.vit_dim],
            tiles,
            checksum: checksum_f64(&encoded_data),
        },
        TraceStage {
            stage: "shuffle".to_string(),
            dims: vec![shuffled_side * shuffled_side, cfg.shuffled_dim()],
            tiles,
            checksum: checksum_f64(&shuffled_data),
        },
        TraceStage {
            stage: "project".to_string(),
            dims: vec![cfg.tokens_per_tile(), cfg.llm_dim],
            tiles,
            checksum: checksum_f64(&proj_data),
        },
        TraceStage {
            stage: "sequence".to_string(),
            dims: vec![sequence.total_tokens],
            tiles,
            checksum: checksum_bytes(sequence.to_json().as_bytes()),
        },
    ];

    Ok(ShapeTrace {
        schema_version: 1,
        stages,
        total_visual_tokens: sequence.total_visual_tokens,
    })
}

/// Consistency guard used by tests and the CLI: visual tokens must equal
/// tiles times per-tile budget.
pub fn verify_trace(trace: &ShapeTrace, model: &VisionModel) -> bool {
    let per_tile = model.config().tokens_per_tile();
    trace
        .stages
        .iter()
        .all(|s| s.tiles * per_tile == trace.total_visual_tokens || s.stage == "sequence")
        && trace.total_visual_tokens
            == trace.stages.first().map_or(0, |s| s.tiles) * per_tile
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{plan_dynamic, plan_msac, TilingConfig};
    use crate::vision::model::ModelConfig;

    fn tiny_model() -> VisionModel {
        VisionModel::new(ModelConfig {
            patch_size: 112,
            vit_dim: 8,
            vit_layers: 1,
            vit_heads: 2,
            llm_dim: 16,
            shuffle_block: 2,
            seed: 7,
        })
        .unwrap()
    }

    fn gradient(w: u32, h: u32) -> ImageBuffer {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[(x % 256) as u8, (y % 256) as u8, 128]);
            }
        }
        ImageBuffer::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn checksum_f64_collapses_negative_zero() {
        assert_eq!(checksum_f64(&[0.0]), checksum_f64(&[-0.0]));
        assert_ne!(checksum_f64(&[0.0]), checksum_f64(&[1.0]));
    }

    #[test]
    fn trace_is_reproducible() {
        let model = tiny_model();
        let img = gradient(900, 450);
        let plan: Plan = plan_msac(900, 450, &TilingConfig::default()).unwrap().into();
        let a = forward_trace(&model, &img, &plan, "total?").unwrap();
        let b = forward_trace(&model, &img, &plan, "total?").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_stages_cover_full_path() {
        let model = tiny_model();
        let img = gradient(448, 448);
        let plan: Plan = plan_dynamic(448, 448, &TilingConfig::default()).unwrap().into();
        let trace = forward_trace(&model, &img, &plan, "q").unwrap();
        let names: Vec<&str> = trace.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(
            names,
            vec!["views", "patch_embed", "encoder", "shuffle", "project", "sequence"]
        );
        assert_eq!(trace.total_visual_tokens, model.config().tokens_per_tile());
        assert!(verify_trace(&trace, &model));
    }

    #[test]
    fn trace_token_totals_follow_tile_count() {
        let model = tiny_model();
        let img = gradient(1400, 440);
        let plan: Plan = plan_dynamic(1400, 440, &TilingConfig::default()).unwrap().into();
        let trace = forward_trace(&model, &img, &plan, "q").unwrap();
        let tiles = plan.view_count() as usize;
        assert_eq!(
            trace.total_visual_tokens,
            tiles * model.config().tokens_per_tile()
        );
    }

    #[test]
    fn trace_checksum_changes_with_content() {
        let model = tiny_model();
        let plan: Plan = plan_dynamic(448, 448, &TilingConfig::default()).unwrap().into();
        let a = forward_trace(&model, &gradient(448, 448), &plan, "q").unwrap();
        let mut img = gradient(448, 448);
        img = {
            let mut data = img.data().to_vec();
            data[0] ^= 0xff;
            ImageBuffer::from_raw(448, 448, data).unwrap()
        };
        let b = forward_trace(&model, &img, &plan, "q").unwrap();
        assert_ne!(a.stages[0].checksum, b.stages[0].checksum);
        assert_ne!(a.stages[4].checksum, b.stages[4].checksum);
    }
}
