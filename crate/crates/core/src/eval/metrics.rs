//! Extraction metrics: parse-gated normalized tree-edit similarity,
//! key-value F1, perfect match, and the OCR containment score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ted::tree_edit_distance;
use crate::eval::tree::{parse_prediction, JsonTree, Prediction};

/// Document category of an extraction sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    Receipt,
    DriversLicense,
    Check,
    Other,
}

impl DocType {
    pub const ALL: [DocType; 4] = [
        DocType::Receipt,
        DocType::DriversLicense,
        DocType::Check,
        DocType::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DocType::Receipt => "receipt",
            DocType::DriversLicense => "drivers_license",
            DocType::Check => "check",
            DocType::Other => "other",
        }
    }
}

/// One scored sample: the three metrics plus the parse flag.
///
/// Invariants: `perfect_match == 1.0` implies the other two are 1.0, and
/// `parsed == false` forces all three to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub parsed: bool,
    pub perfect_match: f64,
    pub effective_ted: f64,
    pub kv_f1: f64,
}

impl ScoreBreakdown {
    pub fn zero() -> Self {
        Self {
            parsed: false,
            perfect_match: 0.0,
            effective_ted: 0.0,
            kv_f1: 0.0,
        }
    }
}

/// The sample unit the scorer consumes.
#[derive(Debug, Clone)]
pub struct ExtractionSample {
    pub doc_type: DocType,
    pub prompt: String,
    pub ground_truth: JsonTree,
    pub raw_prediction: String,
}

fn require_scorable(gt: &JsonTree) -> Result<()> {
    if gt.flatten().is_empty() {
        return Err(Error::arg(
            "ground truth carries no scalar fields to score against",
        ));
    }
    Ok(())
}

/// Parse-gated normalized tree similarity:
/// `max(0, 1 - TED / max(|pred|, |gt|))`, zero on parse failure.
pub fn effective_ted_score(pred: &Prediction, gt: &JsonTree) -> Result<f64> {
    require_scorable(gt)?;
    let Some(tree) = pred.tree() else {
        return Ok(0.0);
    };
    let ted = tree_edit_distance(tree, gt) as f64;
    let denom = tree.node_count().max(gt.node_count()) as f64;
    Ok((1.0 - ted / denom).max(0.0))
}

fn f1(pred_pairs: &[(String, String)], gt_pairs: &[(String, String)]) -> f64 {
    if pred_pairs.is_empty() && gt_pairs.is_empty() {
        return 1.0;
    }
    if pred_pairs.is_empty() || gt_pairs.is_empty() {
        return 0.0;
    }
    // Exact (path, value) matches; duplicates cannot arise because paths
    // are unique within a canonical tree.
    let hits = pred_pairs
        .iter()
        .filter(|pair| gt_pairs.contains(pair))
        .count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / pred_pairs.len() as f64;
    let recall = hits / gt_pairs.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// F1 over flattened `(path, value)` pairs, zero on parse failure.
pub fn kv_f1(pred: &Prediction, gt: &JsonTree) -> Result<f64> {
    require_scorable(gt)?;
    let Some(tree) = pred.tree() else {
        return Ok(0.0);
    };
    Ok(f1(&tree.flatten(), &gt.flatten()))
}

/// 1 iff the canonical trees are identical; parse failure scores 0.
pub fn perfect_match(pred: &Prediction, gt: &JsonTree) -> f64 {
    match pred.tree() {
        Some(tree) if tree == gt => 1.0,
        _ => 0.0,
    }
}

/// Scores one sample; breakdown invariants hold by construction.
pub fn score_sample(sample: &ExtractionSample) -> Result<ScoreBreakdown> {
    let pred = parse_prediction(&sample.raw_prediction);
    if !pred.is_parsed() {
        return Ok(ScoreBreakdown::zero());
    }
    Ok(ScoreBreakdown {
        parsed: true,
        perfect_match: perfect_match(&pred, &sample.ground_truth),
        effective_ted: effective_ted_score(&pred, &sample.ground_truth)?,
        kv_f1: kv_f1(&pred, &sample.ground_truth)?,
    })
}

/// Text-recognition score: 1 iff the normalized ground truth is a substring
/// of the normalized prediction. Normalization lowercases, strips ASCII
/// punctuation, and collapses whitespace runs to single spaces.
pub fn ocr_text_score(pred: &str, gt: &str) -> u8 {
    fn normalize(text: &str) -> String {
        let stripped: String = text
            .chars()
            .filter_map(|c| {
                let c = c.to_ascii_lowercase();
                (!c.is_ascii_punctuation()).then_some(c)
            })
            .collect();
        stripped.split_whitespace().collect::<Vec<_>>().join(" ")
    }
    u8::from(normalize(pred).contains(&normalize(gt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tree(v: serde_json::Value) -> JsonTree {
        JsonTree::from_value(&v)
    }

    fn parsed(v: serde_json::Value) -> Prediction {
        Prediction::Parsed(tree(v))
    }

    #[test]
    fn effective_ted_equal_trees_is_one() {
        let gt = tree(json!({"a": 1, "b": 2}));
        assert_eq!(effective_ted_score(&parsed(json!({"a": 1, "b": 2})), &gt).unwrap(), 1.0);
    }

    #[test]
    fn effective_ted_parse_failure_is_zero() {
        let gt = tree(json!({"a": 1}));
        assert_eq!(effective_ted_score(&Prediction::Unparsed, &gt).unwrap(), 0.0);
    }

    #[test]
    fn effective_ted_one_edit_over_four_nodes() {
        // Both trees have 4 nodes (root, a, b, and one more leaf under b's
        // sibling set); one relabel -> 1 - 1/4 = 0.75.
        let gt = tree(json!({"a": 1, "b": 2, "c": 3}));
        let pred = parsed(json!({"a": 1, "b": 2, "c": 4}));
        assert_eq!(effective_ted_score(&pred, &gt).unwrap(), 0.75);
    }

    #[test]
    fn effective_ted_rejects_unscorable_ground_truth() {
        let gt = tree(json!({}));
        assert!(matches!(
            effective_ted_score(&Prediction::Unparsed, &gt),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn kv_f1_exact_match_is_one() {
        let gt = tree(json!({"a": "1", "b": "2", "c": "3"}));
        assert_eq!(kv_f1(&parsed(json!({"a": "1", "b": "2", "c": "3"})), &gt).unwrap(), 1.0);
    }

    #[test]
    fn kv_f1_half_recall_no_extras() {
        // Prediction has 2 of 4 ground-truth leaves and nothing else:
        // precision 1.0, recall 0.5, F1 = 2/3.
        let gt = tree(json!({"a": 1, "b": 2, "c": 3, "d": 4}));
        let pred = parsed(json!({"a": 1, "b": 2}));
        let f = kv_f1(&pred, &gt).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kv_f1_wrong_values_score_zero() {
        let gt = tree(json!({"a": 1}));
        assert_eq!(kv_f1(&parsed(json!({"a": 2})), &gt).unwrap(), 0.0);
        assert_eq!(kv_f1(&Prediction::Unparsed, &gt).unwrap(), 0.0);
    }

    #[test]
    fn perfect_match_ignores_key_order() {
        let gt = tree(json!({"a": 1, "b": 2}));
        let pred = parse_prediction(r#"{"b": 2, "a": 1}"#);
        assert_eq!(perfect_match(&pred, &gt), 1.0);
    }

    #[test]
    fn perfect_match_fails_on_any_difference() {
        let gt = tree(json!({"a": 1, "b": 2}));
        assert_eq!(perfect_match(&parsed(json!({"a": 1, "b": 3})), &gt), 0.0);
        assert_eq!(perfect_match(&Prediction::Unparsed, &gt), 0.0);
    }

    #[test]
    fn score_sample_equal_prediction_is_all_ones() {
        let sample = ExtractionSample {
            doc_type: DocType::Receipt,
            prompt: "extract".to_string(),
            ground_truth: tree(json!({"total": "5.00"})),
            raw_prediction: r#"{"total": " 5.00 "}"#.to_string(),
        };
        let scores = score_sample(&sample).unwrap();
        assert!(scores.parsed);
        assert_eq!(
            (scores.perfect_match, scores.effective_ted, scores.kv_f1),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn score_sample_unparseable_is_all_zeros() {
        let sample = ExtractionSample {
            doc_type: DocType::Check,
            prompt: "extract".to_string(),
            ground_truth: tree(json!({"amount": "10"})),
            raw_prediction: "unreadable scan, sorry".to_string(),
        };
        let scores = score_sample(&sample).unwrap();
        assert!(!scores.parsed);
        assert_eq!(
            (scores.perfect_match, scores.effective_ted, scores.kv_f1),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn score_sample_half_correct_receipt_matches_hand_computation() {
        // Ground truth: 4 leaves, 6 nodes (root, items array, 2 item leaves,
        // 2 scalar leaves). Prediction gets merchant and the first item
        // right, misses the second item, and mislabels total.
        // Hand computation:
        //   TED: relabel total leaf (1) + relabel items/1 leaf (1) = 2
        //        over max(6, 6) nodes -> 1 - 2/6 = 2/3.
        //   F1: pred pairs {merchant, items/0, items/1(bad), total(bad)},
        //       hits = 2 of 4 -> precision 0.5, recall 0.5, F1 = 0.5.
        let sample = ExtractionSample {
            doc_type: DocType::Receipt,
            prompt: "extract".to_string(),
            ground_truth: tree(json!({
                "merchant": "QuickMart",
                "total": "5.00",
                "items": ["milk", "bread"]
            })),
            raw_prediction: r#"{"merchant": "QuickMart", "total": "6.00", "items": ["milk", "rye"]}"#
                .to_string(),
        };
        let scores = score_sample(&sample).unwrap();
        assert!(scores.parsed);
        assert_eq!(scores.perfect_match, 0.0);
        assert!((scores.effective_ted - 2.0 / 3.0).abs() < 1e-12);
        assert!((scores.kv_f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ocr_score_containment_after_normalization() {
        assert_eq!(ocr_text_score("The total is $5.00", "$5.00"), 1);
        assert_eq!(ocr_text_score("", "anything"), 0);
        assert_eq!(ocr_text_score("exact", "exact"), 1);
        assert_eq!(ocr_text_score("A  B\tC", "a b c"), 1);
        assert_eq!(ocr_text_score("totally different", "absent"), 0);
    }

    #[test]
    fn ocr_score_empty_ground_truth_always_contains() {
        // Empty needle is a substring of anything, including empty text.
        assert_eq!(ocr_text_score("", ""), 1);
    }
}
