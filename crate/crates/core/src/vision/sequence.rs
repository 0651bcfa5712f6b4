//! Prompt-sequence assembly: interleaves text segments with per-tile visual
//! token blocks.
//!
//! There is no learned tokenizer here. Text segments carry a declared token
//! count (whitespace-separated word count), which is enough to audit the
//! budget arithmetic the sequence exists to verify.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vision::model::VisualTokens;

/// Markers and fixed text wrapped around the visual blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTemplate {
    pub system: String,
    pub image_start: String,
    pub image_end: String,
}

impl Default for ChatTemplate {
    fn default() -> Self {
        Self {
            system: "You are a careful assistant that reads documents.".to_string(),
            image_start: "<img>".to_string(),
            image_end: "</img>".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Text,
    ImageBlock,
}

/// One sequence segment: text payload or a placeholder for an embedded
/// visual block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub tokens: usize,
    pub payload: String,
}

/// Assembled model input. `total_visual_tokens` sums the image-block
/// segments; `total_tokens` sums everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub segments: Vec<Segment>,
    pub total_visual_tokens: usize,
    pub total_tokens: usize,
}

impl TokenSequence {
    /// Canonical serialized form; identical inputs serialize identically.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serialization cannot fail")
    }
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn text_segment(payload: &str) -> Segment {
    Segment {
        kind: SegmentKind::Text,
        tokens: word_count(payload),
        payload: payload.to_string(),
    }
}

/// Builds `[system][per-block <start> block <end>][user prompt]`.
///
/// Every image block is bracketed by the template markers; block order
/// follows the input, which follows plan order upstream.
pub fn assemble_sequence(
    blocks: &[VisualTokens],
    prompt: &str,
    template: &ChatTemplate,
) -> Result<TokenSequence> {
    if template.image_start.is_empty() || template.image_end.is_empty() {
        return Err(Error::arg("chat template image markers must be non-empty"));
    }

    let mut segments = Vec::new();
    if !template.system.is_empty() {
        segments.push(text_segment(&template.system));
    }
    for (i, block) in blocks.iter().enumerate() {
        segments.push(text_segment(&template.image_start));
        segments.push(Segment {
            kind: SegmentKind::ImageBlock,
            tokens: block.num_tokens,
            payload: format!("tile_{i}"),
        });
        segments.push(text_segment(&template.image_end));
    }
    if !prompt.is_empty() {
        segments.push(text_segment(prompt));
    }

    let total_visual_tokens = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::ImageBlock)
        .map(|s| s.tokens)
        .sum();
    let total_tokens = segments.iter().map(|s| s.tokens).sum();
    Ok(TokenSequence {
        segments,
        total_visual_tokens,
        total_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: usize) -> VisualTokens {
        VisualTokens {
            num_tokens: n,
            dim: 4,
            data: vec![0.0; n * 4],
        }
    }

    #[test]
    fn text_only_sequence_has_no_visual_tokens() {
        let seq = assemble_sequence(&[], "hi", &ChatTemplate::default()).unwrap();
        assert_eq!(seq.total_visual_tokens, 0);
        assert!(seq.segments.iter().all(|s| s.kind == SegmentKind::Text));
        assert_eq!(seq.segments.last().unwrap().payload, "hi");
    }

    #[test]
    fn seven_blocks_total_1792_visual_tokens() {
        let blocks: Vec<VisualTokens> = (0..7).map(|_| block(256)).collect();
        let seq = assemble_sequence(&blocks, "read this", &ChatTemplate::default()).unwrap();
        assert_eq!(seq.total_visual_tokens, 1792);
        let image_segments = seq
            .segments
            .iter()
            .filter(|s| s.kind == SegmentKind::ImageBlock)
            .count();
        assert_eq!(image_segments, 7);
        assert!(seq.total_tokens > seq.total_visual_tokens);
    }

    #[test]
    fn blocks_are_bracketed_by_markers() {
        let seq = assemble_sequence(&[block(3)], "", &ChatTemplate::default()).unwrap();
        let kinds: Vec<SegmentKind> = seq.segments.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::Text,
                SegmentKind::Text,
                SegmentKind::ImageBlock,
                SegmentKind::Text
            ]
        );
        assert_eq!(seq.segments[1].payload, "<img>");
        assert_eq!(seq.segments[3].payload, "</img>");
    }

    #[test]
    fn identical_inputs_serialize_identically() {
        let blocks = vec![block(256), block(256)];
        let a = assemble_sequence(&blocks, "total?", &ChatTemplate::default()).unwrap();
        let b = assemble_sequence(&blocks, "total?", &ChatTemplate::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn empty_markers_are_rejected() {
        let template = ChatTemplate {
            image_start: String::new(),
            ..ChatTemplate::default()
        };
        assert!(matches!(
            assemble_sequence(&[], "x", &template),
            Err(Error::InvalidArgument(_))
        ));
    }
}
