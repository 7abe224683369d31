//! Chat-completion backends.
//!
//! [`ChatBackend`] is the single call surface used by the orchestrator and the
//! benchmark generators. Two implementations ship: [`LiveBackend`] talks to an
//! HTTPS chat-completion endpoint, [`ScriptedBackend`] replays a fixed
//! transcript for deterministic runs.

mod live;
mod retry;
mod scripted;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::config::{Pricing, RunConfig};
use crate::types::{AgentMessage, Speaker, Usage};

pub use live::{http_requests_sent, HttpReply, HttpTransport, LiveBackend, ReqwestTransport};
pub use retry::{retry_with_backoff, AttemptError, RetryPolicy};
pub use scripted::{ScriptEntry, ScriptedBackend, ScriptedFailure, ScriptedTranscript};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },

    #[error("malformed response: {0}")]
    Malformed(String),

    #[error("scripted transcript exhausted after {consumed} entries")]
    TranscriptExhausted { consumed: usize },

    #[error("scripted fatal failure at position {position}")]
    ScriptedFatal { position: usize },

    #[error("failed to load transcript: {0}")]
    TranscriptLoad(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    messages: Vec<AgentMessage>,
    pub temperature: f64,
    pub top_k: u32,
    pub request_timeout: Duration,
}

impl ChatRequest {
    pub fn new(
        model_id: impl Into<String>,
        messages: Vec<AgentMessage>,
        temperature: f64,
        top_k: u32,
        request_timeout: Duration,
    ) -> Result<Self, BackendError> {
        match messages.first() {
            None => return Err(BackendError::InvalidRequest("no messages".into())),
            Some(first) if first.speaker != Speaker::System => {
                return Err(BackendError::InvalidRequest(
                    "first message must be the system prompt".into(),
                ))
            }
            Some(_) => {}
        }
        Ok(Self {
            model_id: model_id.into(),
            messages,
            temperature,
            top_k,
            request_timeout,
        })
    }

    /// Request carrying the sampling settings of `config`.
    pub fn from_config(config: &RunConfig, messages: Vec<AgentMessage>) -> Result<Self, BackendError> {
        Self::new(
            config.model_id.clone(),
            messages,
            config.temperature,
            config.top_k,
            config.request_timeout(),
        )
    }

    pub fn messages(&self) -> &[AgentMessage] {
        &self.messages
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    pub latency: Duration,
    /// Total attempts including the successful one.
    pub attempts: u32,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

/// Wraps a backend and counts `complete` calls, successful or not.
#[derive(Debug)]
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for CountingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// Cost of one usage record at the given per-1K rates.
pub fn estimate_cost(usage: Usage, pricing: Pricing) -> f64 {
    usage.prompt_tokens as f64 / 1000.0 * pricing.prompt_per_1k
        + usage.completion_tokens as f64 / 1000.0 * pricing.completion_per_1k
}

pub(crate) fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
