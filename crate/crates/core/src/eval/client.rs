//! Model inference clients. Evaluation talks to a model through the
//! `InferenceClient` trait so the scoring pipeline runs identically against
//! a live HTTP endpoint or a directory of canned responses.

use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine;
use serde::Serialize;

use crate::error::{Error, Result};

/// One inference call: a prompt plus zero or more image attachments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceRequest {
    pub id: String,
    pub prompt: String,
    pub image_paths: Vec<PathBuf>,
}

/// Client failures split by severity. `Transport` marks a single sample as
/// errored and evaluation continues; `Fatal` aborts the run (bad credentials
/// or a missing replay file will not fix themselves on the next sample).
#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fatal client error: {0}")]
    Fatal(String),
}

/// A model endpoint. `Sync` so one client can be shared across worker
/// threads; implementations hold their own interior state.
pub trait InferenceClient: Sync {
    fn send(&self, request: &InferenceRequest) -> std::result::Result<String, ClientError>;
}

#[derive(Serialize)]
struct WirePart {
    #[serde(rename = "type")]
    kind: &'static str,
    data: String,
}

#[derive(Serialize)]
struct WireMessage {
    role: &'static str,
    content: Vec<WirePart>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage>,
}

/// Blocking HTTP client. Sends `{"model", "messages"}` with the prompt as a
/// text part and each image as a base64 part, and expects `{"content": ...}`
/// back.
pub struct HttpClient {
    endpoint: String,
    model: String,
    token: Option<String>,
    inner: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(
        endpoint: &str,
        model: &str,
        token: Option<&str>,
        timeout: Duration,
    ) -> Result<Self> {
        if endpoint.is_empty() {
            return Err(Error::ClientConfig("endpoint must not be empty".into()));
        }
        let inner = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::ClientConfig(format!("http client init failed: {e}")))?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            token: token.map(str::to_string),
            inner,
        })
    }

    /// Reads the endpoint from `VISTILE_ENDPOINT` and an optional bearer
    /// token from `VISTILE_TOKEN`.
    pub fn from_env(model: &str, timeout: Duration) -> Result<Self> {
        let endpoint = std::env::var("VISTILE_ENDPOINT")
            .map_err(|_| Error::ClientConfig("VISTILE_ENDPOINT is not set".into()))?;
        let token = std::env::var("VISTILE_TOKEN").ok();
        Self::new(&endpoint, model, token.as_deref(), timeout)
    }

    fn build_body(&self, request: &InferenceRequest) -> std::result::Result<String, ClientError> {
        let mut content = vec![WirePart {
            kind: "text",
            data: request.prompt.clone(),
        }];
        for path in &request.image_paths {
            let bytes = std::fs::read(path).map_err(|e| {
                ClientError::Fatal(format!("cannot read image {}: {e}", path.display()))
            })?;
            content.push(WirePart {
                kind: "image",
                data: base64::engine::general_purpose::STANDARD.encode(bytes),
            });
        }
        let body = WireRequest {
            model: &self.model,
            messages: vec![WireMessage {
                role: "user",
                content,
            }],
        };
        serde_json::to_string(&body)
            .map_err(|e| ClientError::Fatal(format!("request serialization failed: {e}")))
    }
}

impl InferenceClient for HttpClient {
    fn send(&self, request: &InferenceRequest) -> std::result::Result<String, ClientError> {
        let body = self.build_body(request)?;
        let mut builder = self
            .inner
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .body(body);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| ClientError::Transport(format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ClientError::Transport(format!(
                "endpoint returned status {status}"
            )));
        }
        let parsed: serde_json::Value = response
            .json()
            .map_err(|e| ClientError::Transport(format!("invalid response body: {e}")))?;
        match parsed.get("content").and_then(|v| v.as_str()) {
            Some(text) => Ok(text.to_string()),
            None => Err(ClientError::Transport(
                "response body has no string `content` field".into(),
            )),
        }
    }
}

/// Offline client that answers each request from `<dir>/<id>.txt`. Used for
/// reproducible evaluation runs and tests; a missing file is fatal because
/// it means the replay directory does not match the sample set.
pub struct ReplayClient {
    dir: PathBuf,
}

impl ReplayClient {
    pub fn new(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::ClientConfig(format!(
                "replay path {} is not a directory",
                dir.display()
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }
}

impl InferenceClient for ReplayClient {
    fn send(&self, request: &InferenceRequest) -> std::result::Result<String, ClientError> {
        let path = self.dir.join(format!("{}.txt", request.id));
        std::fs::read_to_string(&path)
            .map_err(|e| ClientError::Fatal(format!("no replay for {}: {e}", request.id)))
    }
}
