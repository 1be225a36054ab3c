//! Hosted-model backend: pacing, retries and the provider adapter.

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use super::{BackendConfig, BackendError, BackendKind, DecisionBackend, Query, Reply};
use crate::context::{render_system_prompt, RawResponse};

/// Monotonic time source. Time is measured from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually driven clock; `sleep` advances it instantly. Clones share the
/// same time.
#[derive(Debug, Clone, Default)]
pub struct FakeClock {
    now: Rc<Cell<Duration>>,
    sleeps: Rc<RefCell<Vec<Duration>>>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        self.now.set(self.now.get() + d);
    }

    /// Every sleep requested so far.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.borrow().clone()
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn sleep(&self, d: Duration) {
        self.sleeps.borrow_mut().push(d);
        self.advance(d);
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("unexpected response body: {0}")]
    Decode(String),
}

/// One request/response exchange with a model provider.
pub trait ModelTransport {
    fn generate(&mut self, system_prompt: &str, question: &str, timeout: Duration) -> Result<String, TransportError>;
}

/// Enforces a minimum spacing between request starts.
#[derive(Debug, Clone)]
pub struct Pacer {
    min_interval: Duration,
    last_request: Option<Duration>,
}

impl Pacer {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            last_request: None,
        }
    }

    /// Sleeps until a request may start, then records the start time.
    pub fn admit(&mut self, clock: &dyn Clock) -> Duration {
        if let Some(last) = self.last_request {
            let ready_at = last + self.min_interval;
            let now = clock.now();
            if now < ready_at {
                clock.sleep(ready_at - now);
            }
        }
        let start = clock.now();
        self.last_request = Some(start);
        start
    }
}

pub struct LlmBackend<T, C> {
    transport: T,
    clock: C,
    pacer: Pacer,
    timeout: Duration,
    max_retries: u32,
    system_prompt: String,
}

impl<T: ModelTransport, C: Clock> LlmBackend<T, C> {
    pub fn new(transport: T, clock: C, config: &BackendConfig) -> Self {
        Self {
            transport,
            clock,
            pacer: Pacer::new(Duration::from_secs_f64(config.min_request_interval)),
            timeout: Duration::from_secs_f64(config.request_timeout),
            max_retries: config.max_retries,
            system_prompt: render_system_prompt(),
        }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: ModelTransport, C: Clock> DecisionBackend for LlmBackend<T, C> {
    fn kind(&self) -> BackendKind {
        BackendKind::Llm
    }

    fn decide(&mut self, query: &Query<'_>) -> Result<Reply, BackendError> {
        let mut last_err = TransportError::Timeout;
        let attempts = self.max_retries + 1;
        for attempt in 1..=attempts {
            let started = self.pacer.admit(&self.clock);
            // The system prompt is resent with every request; no session state.
            match self
                .transport
                .generate(&self.system_prompt, query.question, self.timeout)
            {
                Ok(text) => {
                    let latency = (self.clock.now() - started).as_secs_f64();
                    return Ok(Reply {
                        response: RawResponse::new(text.trim()),
                        latency,
                        backend_kind: BackendKind::Llm.as_str().to_string(),
                        structured: None,
                    });
                }
                Err(TransportError::Status { status, body }) if status < 500 && status != 429 => {
                    return Err(BackendError::Http { status, body });
                }
                Err(e) => {
                    log::warn!("model request attempt {attempt}/{attempts} failed: {e}");
                    if let TransportError::RateLimited {
                        retry_after: Some(wait),
                    } = &e
                    {
                        if attempt < attempts {
                            self.clock.sleep(*wait);
                        }
                    }
                    last_err = e;
                }
            }
        }
        Err(match last_err {
            TransportError::Timeout => BackendError::Timeout { attempts },
            TransportError::RateLimited { .. } => BackendError::RateLimited { attempts },
            TransportError::Status { status, body } => BackendError::Http { status, body },
            other => BackendError::Transport(other.to_string()),
        })
    }
}

/// JSON body for a `generateContent` call.
pub fn gemini_request_body(system_prompt: &str, question: &str) -> Value {
    json!({
        "systemInstruction": { "parts": [{ "text": system_prompt }] },
        "contents": [{ "role": "user", "parts": [{ "text": question }] }],
        "generationConfig": { "temperature": 0.0 }
    })
}

/// Concatenated text parts of the first candidate.
pub fn gemini_extract_text(body: &Value) -> Result<String, TransportError> {
    let parts = body
        .pointer("/candidates/0/content/parts")
        .and_then(Value::as_array)
        .ok_or_else(|| TransportError::Decode(truncate(&body.to_string())))?;
    let text: String = parts
        .iter()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect();
    if text.is_empty() {
        return Err(TransportError::Decode("candidate has no text parts".into()));
    }
    Ok(text)
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

/// Blocking HTTPS client for the generative-language REST API.
pub struct GeminiTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
}

impl GeminiTransport {
    pub fn new(endpoint: &str, model: &str, api_key: String) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/models/{}:generateContent", endpoint.trim_end_matches('/'), model),
            api_key,
        })
    }
}

impl ModelTransport for GeminiTransport {
    fn generate(&mut self, system_prompt: &str, question: &str, timeout: Duration) -> Result<String, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .timeout(timeout)
            .header("x-goog-api-key", &self.api_key)
            .json(&gemini_request_body(system_prompt, question))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Network(e.to_string())
                }
            })?;

        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(TransportError::RateLimited { retry_after });
        }
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                status,
                body: truncate(&text),
            });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))?;
        gemini_extract_text(&body)
    }
}
