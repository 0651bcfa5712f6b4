//! Structured-extraction evaluation: canonical JSON trees, tree edit
//! distance, per-sample metrics, report aggregation, and a concurrent
//! runner that drives a pluggable inference client.

pub mod client;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod ted;
pub mod tree;

pub use client::{ClientError, HttpClient, InferenceClient, InferenceRequest, ReplayClient};
pub use metrics::{
    effective_ted_score, kv_f1, ocr_text_score, perfect_match, score_sample, DocType,
    ExtractionSample, ScoreBreakdown,
};
pub use report::{aggregate, EvalReport, ScoredSample, TypeReport};
pub use runner::{load_eval_set, load_results, run_eval, write_results, EvalSample, SampleResult};
pub use ted::tree_edit_distance;
pub use tree::{parse_prediction, JsonTree, Prediction};
