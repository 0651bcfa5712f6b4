//! Evaluation runner: loads a sample set, fans requests out over worker
//! threads, scores each response, and writes results as JSONL. Reruns are
//! resumable: samples whose ids already appear in the output file are not
//! sent again.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::client::{ClientError, InferenceClient, InferenceRequest};
use crate::eval::metrics::{score_sample, DocType, ExtractionSample, ScoreBreakdown};
use crate::eval::report::ScoredSample;
use crate::eval::tree::JsonTree;

/// One evaluation sample as stored in the input JSONL set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    pub doc_type: DocType,
    pub prompt: String,
    #[serde(default)]
    pub images: Vec<PathBuf>,
    pub ground_truth: serde_json::Value,
}

/// One scored model response as stored in the output JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub id: String,
    pub doc_type: DocType,
    pub raw_prediction: String,
    pub errored: bool,
    pub scores: ScoreBreakdown,
}

impl SampleResult {
    pub fn into_scored(self) -> ScoredSample {
        ScoredSample {
            id: self.id,
            doc_type: self.doc_type,
            errored: self.errored,
            scores: self.scores,
        }
    }
}

/// Loads an evaluation set, rejecting duplicate ids and ground truth that
/// cannot be scored (no scalar leaves).
pub fn load_eval_set(path: &Path) -> Result<Vec<EvalSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: EvalSample = serde_json::from_str(&line).map_err(|e| {
            Error::parse(format!("line {}: {e}", lineno + 1)).with_path(path)
        })?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::parse(format!(
                "line {}: duplicate sample id {:?}",
                lineno + 1,
                sample.id
            ))
            .with_path(path));
        }
        let tree = JsonTree::from_value(&sample.ground_truth);
        if tree.flatten().is_empty() {
            return Err(Error::parse(format!(
                "line {}: sample {:?} has a ground truth with no scalar fields",
                lineno + 1,
                sample.id
            ))
            .with_path(path));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::parse("evaluation set is empty").with_path(path));
    }
    Ok(samples)
}

/// Reads a results file in stored order.
pub fn load_results(path: &Path) -> Result<Vec<SampleResult>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut results = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let result: SampleResult = serde_json::from_str(&line).map_err(|e| {
            Error::parse(format!("line {}: {e}", lineno + 1)).with_path(path)
        })?;
        results.push(result);
    }
    Ok(results)
}

/// Reads previously written results keyed by id. A missing file is an empty
/// resume state, not an error.
fn load_existing_results(path: &Path) -> Result<HashMap<String, SampleResult>> {
    if !path.exists() {
        return Ok(HashMap::new());
    }
    Ok(load_results(path)?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect())
}

/// Writes the full result set through a temp file and a rename, so an
/// interrupted run leaves either the old file or the new one, never a
/// truncated mix.
pub fn write_results(path: &Path, results: &[SampleResult]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match parent {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    {
        let mut writer = std::io::BufWriter::new(tmp.as_file());
        for result in results {
            let line = serde_json::to_string(result).map_err(|e| {
                Error::parse(format!("result serialization failed: {e}"))
            })?;
            writeln!(writer, "{line}").map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
        }
        writer.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn score_response(sample: &EvalSample, raw_prediction: String) -> Result<SampleResult> {
    let extraction = ExtractionSample {
        doc_type: sample.doc_type,
        prompt: sample.prompt.clone(),
        ground_truth: JsonTree::from_value(&sample.ground_truth),
        raw_prediction,
    };
    let scores = score_sample(&extraction)?;
    Ok(SampleResult {
        id: sample.id.clone(),
        doc_type: sample.doc_type,
        raw_prediction: extraction.raw_prediction,
        errored: false,
        scores,
    })
}

fn errored_result(sample: &EvalSample, message: &str) -> SampleResult {
    SampleResult {
        id: sample.id.clone(),
        doc_type: sample.doc_type,
        raw_prediction: format!("<error: {message}>"),
        errored: true,
        scores: ScoreBreakdown::zero(),
    }
}

/// Runs every sample through the client with `concurrency` worker threads
/// and writes scored results to `out_path` in input order. Transport errors
/// score the sample 0 and set `errored`; fatal client errors abort the run.
pub fn run_eval(
    samples: &[EvalSample],
    client: &dyn InferenceClient,
    concurrency: usize,
    out_path: &Path,
) -> Result<Vec<SampleResult>> {
    if samples.is_empty() {
        return Err(Error::arg("evaluation sample set is empty"));
    }
    if concurrency == 0 {
        return Err(Error::arg("concurrency must be at least 1"));
    }
    let existing = load_existing_results(out_path)?;
    let pending: Vec<&EvalSample> = samples
        .iter()
        .filter(|s| !existing.contains_key(&s.id))
        .collect();

    let next = AtomicUsize::new(0);
    let fresh: Mutex<HashMap<String, SampleResult>> = Mutex::new(HashMap::new());
    let fatal: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..concurrency.min(pending.len().max(1)) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= pending.len() {
                    break;
                }
                if fatal.lock().unwrap().is_some() {
                    break;
                }
                let sample = pending[index];
                let request = InferenceRequest {
                    id: sample.id.clone(),
                    prompt: sample.prompt.clone(),
                    image_paths: sample.images.clone(),
                };
                let result = match client.send(&request) {
                    Ok(raw) => match score_response(sample, raw) {
                        Ok(result) => result,
                        Err(e) => {
                            fatal.lock().unwrap().get_or_insert(e);
                            break;
                        }
                    },
                    Err(ClientError::Transport(message)) => errored_result(sample, &message),
                    Err(ClientError::Fatal(message)) => {
                        fatal
                            .lock()
                            .unwrap()
                            .get_or_insert(Error::ClientConfig(message));
                        break;
                    }
                };
                fresh.lock().unwrap().insert(result.id.clone(), result);
            });
        }
    });

    if let Some(err) = fatal.into_inner().unwrap() {
        return Err(err);
    }
    let mut fresh = fresh.into_inner().unwrap();

    let mut ordered = Vec::with_capacity(samples.len());
    for sample in samples {
        let result = existing
            .get(&sample.id)
            .cloned()
            .or_else(|| fresh.remove(&sample.id))
            .expect("every sample is either resumed or freshly scored");
        ordered.push(result);
    }
    write_results(out_path, &ordered)?;
    Ok(ordered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    fn sample(id: &str, gt: serde_json::Value) -> EvalSample {
        EvalSample {
            id: id.to_string(),
            doc_type: DocType::Receipt,
            prompt: "Extract the fields.".to_string(),
            images: Vec::new(),
            ground_truth: gt,
        }
    }

    struct EchoClient {
        responses: HashMap<String, String>,
        calls: AtomicUsize,
    }

    impl EchoClient {
        fn new(pairs: &[(&str, &str)]) -> Self {
            Self {
                responses: pairs
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl InferenceClient for EchoClient {
        fn send(&self, request: &InferenceRequest) -> std::result::Result<String, ClientError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.responses.get(&request.id) {
                Some(text) => Ok(text.clone()),
                None => Err(ClientError::Transport("simulated outage".into())),
            }
        }
    }

    struct FatalClient;

    impl InferenceClient for FatalClient {
        fn send(&self, _request: &InferenceRequest) -> std::result::Result<String, ClientError> {
            Err(ClientError::Fatal("bad credentials".into()))
        }
    }

    fn gt() -> serde_json::Value {
        serde_json::json!({"merchant": "QuickMart", "total": "5.00"})
    }

    #[test]
    fn run_eval_scores_and_preserves_input_order() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let samples = vec![
            sample("a", gt()),
            sample("b", gt()),
            sample("c", gt()),
        ];
        let client = EchoClient::new(&[
            ("a", r#"{"merchant": "QuickMart", "total": "5.00"}"#),
            ("b", "unparseable refusal"),
            ("c", r#"{"merchant": "QuickMart", "total": "9.99"}"#),
        ]);
        let results = run_eval(&samples, &client, 3, &out).unwrap();
        let ids: Vec<&str> = results.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert_eq!(results[0].scores.perfect_match, 1.0);
        assert!(!results[1].scores.parsed);
        assert_eq!(results[1].scores.kv_f1, 0.0);
        assert!(results[2].scores.kv_f1 > 0.0);
        assert!(results[2].scores.kv_f1 < 1.0);
    }

    #[test]
    fn transport_errors_mark_the_sample_and_continue() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let samples = vec![sample("a", gt()), sample("missing", gt())];
        let client = EchoClient::new(&[("a", r#"{"merchant": "QuickMart", "total": "5.00"}"#)]);
        let results = run_eval(&samples, &client, 2, &out).unwrap();
        assert!(!results[0].errored);
        assert!(results[1].errored);
        assert_eq!(results[1].scores, ScoreBreakdown::zero());
    }

    #[test]
    fn fatal_errors_abort_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let samples = vec![sample("a", gt())];
        let err = run_eval(&samples, &FatalClient, 1, &out).unwrap_err();
        assert!(matches!(err, Error::ClientConfig(_)));
        assert!(!out.exists());
    }

    #[test]
    fn resume_skips_already_scored_ids() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let samples = vec![sample("a", gt()), sample("b", gt())];
        let client =
            EchoClient::new(&[("a", r#"{"merchant": "QuickMart", "total": "5.00"}"#)]);
        // First pass scores only `a`; `b` errors out over transport.
        run_eval(&samples, &client, 1, &out).unwrap();
        assert_eq!(client.calls.load(Ordering::Relaxed), 2);

        // Second pass resumes: both ids already exist, so nothing is sent.
        let results = run_eval(&samples, &client, 1, &out).unwrap();
        assert_eq!(client.calls.load(Ordering::Relaxed), 2);
        assert_eq!(results.len(), 2);
        assert!(results[1].errored);
    }

    #[test]
    fn resume_retries_only_missing_ids() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let client = EchoClient::new(&[
            ("a", r#"{"merchant": "QuickMart", "total": "5.00"}"#),
            ("b", r#"{"merchant": "QuickMart", "total": "5.00"}"#),
        ]);
        run_eval(&[sample("a", gt())], &client, 1, &out).unwrap();
        assert_eq!(client.calls.load(Ordering::Relaxed), 1);

        let results = run_eval(&[sample("a", gt()), sample("b", gt())], &client, 1, &out).unwrap();
        assert_eq!(client.calls.load(Ordering::Relaxed), 2);
        assert_eq!(results.len(), 2);
        assert_eq!(results[1].scores.perfect_match, 1.0);
    }

    #[test]
    fn output_file_round_trips_through_serde() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let samples = vec![sample("a", gt())];
        let client = EchoClient::new(&[("a", r#"{"merchant": "QuickMart", "total": "5.00"}"#)]);
        let results = run_eval(&samples, &client, 1, &out).unwrap();
        let reloaded = load_existing_results(&out).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded["a"], results[0]);
    }

    #[test]
    fn load_eval_set_rejects_duplicates_and_empty_gt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.jsonl");

        let a = serde_json::to_string(&sample("a", gt())).unwrap();
        std::fs::write(&path, format!("{a}\n{a}\n")).unwrap();
        assert!(matches!(load_eval_set(&path), Err(Error::Parse { .. })));

        let empty = serde_json::to_string(&sample("e", serde_json::json!({}))).unwrap();
        std::fs::write(&path, format!("{empty}\n")).unwrap();
        assert!(matches!(load_eval_set(&path), Err(Error::Parse { .. })));

        std::fs::write(&path, format!("{a}\n")).unwrap();
        let set = load_eval_set(&path).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn run_eval_with_many_threads_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<EvalSample> = (0..32)
            .map(|i| sample(&format!("s{i:02}"), gt()))
            .collect();
        let pairs: Vec<(String, String)> = (0..32)
            .map(|i| {
                (
                    format!("s{i:02}"),
                    r#"{"merchant": "QuickMart", "total": "5.00"}"#.to_string(),
                )
            })
            .collect();
        let pair_refs: Vec<(&str, &str)> = pairs
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let client = EchoClient::new(&pair_refs);

        let out1 = dir.path().join("r1.jsonl");
        let out2 = dir.path().join("r2.jsonl");
        run_eval(&samples, &client, 8, &out1).unwrap();
        run_eval(&samples, &client, 3, &out2).unwrap();
        let b1 = std::fs::read(&out1).unwrap();
        let b2 = std::fs::read(&out2).unwrap();
        assert_eq!(b1, b2);
    }
}
