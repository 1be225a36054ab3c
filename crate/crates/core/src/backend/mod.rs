//! Decision sources behind one interface.
//!
//! * `oracle` answers from the structured rule assessment;
//! * `llm` sends the system prompt plus question to a hosted model, paced
//!   to a minimum request interval;
//! * `replay` plays back a recorded transcript, checking that each question
//!   matches what was recorded.
//!
//! All three produce the same transcript records.

pub mod llm;
pub mod replay;
pub mod transcript;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{render_reply, RawResponse};
use crate::rules::{Assessment, Decision};

pub use llm::{Clock, FakeClock, GeminiTransport, LlmBackend, ModelTransport, SystemClock, TransportError};
pub use replay::ReplayBackend;
pub use transcript::{read_transcript, record_transcript, TranscriptEntry};

pub const DEFAULT_API_KEY_ENV: &str = "GOOGLE_API_KEY";
pub const DEFAULT_MODEL: &str = "gemini-1.5-flash";
pub const DEFAULT_ENDPOINT: &str = "https://generativelanguage.googleapis.com/v1beta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Llm,
    Replay,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Oracle => "oracle",
            BackendKind::Llm => "llm",
            BackendKind::Replay => "replay",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(BackendKind::Oracle),
            "llm" => Ok(BackendKind::Llm),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend `{other}` (expected oracle, llm or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub api_key_env_name: String,
    pub model_identifier: String,
    pub endpoint: String,
    /// Seconds between the starts of consecutive outbound requests.
    pub min_request_interval: f64,
    /// Seconds.
    pub request_timeout: f64,
    pub max_retries: u32,
    /// Source transcript for replay.
    pub transcript_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Oracle,
            api_key_env_name: DEFAULT_API_KEY_ENV.to_string(),
            model_identifier: DEFAULT_MODEL.to_string(),
            endpoint: DEFAULT_ENDPOINT.to_string(),
            min_request_interval: 4.0,
            request_timeout: 30.0,
            max_retries: 2,
            transcript_path: None,
        }
    }
}

impl BackendConfig {
    pub fn oracle() -> Self {
        Self::default()
    }

    pub fn replay(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Replay,
            transcript_path: Some(path.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.min_request_interval >= 0.0) || !self.min_request_interval.is_finite() {
            return Err(BackendError::Config("min_request_interval must be ≥ 0".into()));
        }
        if !(self.request_timeout > 0.0) {
            return Err(BackendError::Config("request_timeout must be > 0".into()));
        }
        if self.kind == BackendKind::Replay && self.transcript_path.is_none() {
            return Err(BackendError::Config("replay backend needs a transcript path".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("environment variable {var} with the API key is not set")]
    MissingApiKey { var: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("transcript exhausted at entry {index}")]
    ReplayExhausted { index: usize },
    #[error("question #{index} differs from the recording\n  recorded: {expected}\n  asked:    {actual}")]
    ReplayMismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("transcript I/O: {0}")]
    Io(String),
}

impl BackendError {
    /// Transient failures the loop answers with its fail-safe policy;
    /// everything else aborts the run.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout { .. } | BackendError::RateLimited { .. } | BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// One question to a backend, with the structured assessment it was
/// rendered from.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub sim_time: f64,
    pub question: &'a str,
    pub assessment: &'a Assessment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub response: RawResponse,
    /// Seconds spent waiting on the backend (excluding pacing sleeps).
    pub latency: f64,
    pub backend_kind: String,
    /// Decision taken directly from structured state, when the backend has
    /// one; `None` means the caller parses `response`.
    pub structured: Option<Option<Decision>>,
}

pub trait DecisionBackend {
    fn kind(&self) -> BackendKind;
    fn decide(&mut self, query: &Query<'_>) -> Result<Reply, BackendError>;
}

/// Answers from the rule assessment; text is emitted only for the log.
#[derive(Debug, Default, Clone)]
pub struct OracleBackend;

impl DecisionBackend for OracleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn decide(&mut self, query: &Query<'_>) -> Result<Reply, BackendError> {
        let decision = query.assessment.decision;
        Ok(Reply {
            response: RawResponse::new(render_reply(decision.as_ref())),
            latency: 0.0,
            backend_kind: BackendKind::Oracle.as_str().to_string(),
            structured: Some(decision),
        })
    }
}

pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn DecisionBackend>, BackendError> {
    config.validate()?;
    match config.kind {
        BackendKind::Oracle => Ok(Box::new(OracleBackend)),
        BackendKind::Replay => {
            let path = config.transcript_path.as_ref().expect("validated");
            Ok(Box::new(ReplayBackend::from_path(path)?))
        }
        BackendKind::Llm => {
            let key = std::env::var(&config.api_key_env_name)
                .ok()
                .filter(|k| !k.trim().is_empty())
                .ok_or_else(|| BackendError::MissingApiKey {
                    var: config.api_key_env_name.clone(),
                })?;
            let transport = GeminiTransport::new(&config.endpoint, &config.model_identifier, key)?;
            Ok(Box::new(LlmBackend::new(transport, SystemClock::new(), config)))
        }
    }
}
