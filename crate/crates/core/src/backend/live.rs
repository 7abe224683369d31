use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::retry::{retry_with_backoff, AttemptError, RetryPolicy};
use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::config::{EndpointConfig, RunConfig};
use crate::types::Usage;

static HTTP_REQUESTS_SENT: AtomicUsize = AtomicUsize::new(0);

/// Process-wide count of HTTP requests issued by [`ReqwestTransport`].
pub fn http_requests_sent() -> usize {
    HTTP_REQUESTS_SENT.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// One POST of a JSON body with bearer auth. `Err` means no HTTP status was
/// received (timeout, connection failure) and is treated as transient.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, String> {
        HTTP_REQUESTS_SENT.fetch_add(1, Ordering::SeqCst);
        let response = self
            .client
            .post(url)
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// HTTPS chat-completion client speaking the common `messages` JSON format.
pub struct LiveBackend {
    endpoint: EndpointConfig,
    api_key: String,
    policy: RetryPolicy,
    transport: Box<dyn HttpTransport>,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend")
            .field("endpoint", &self.endpoint)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

impl LiveBackend {
    /// Reads the API key from the environment variable named in the config.
    /// Fails before any network traffic when it is unset or empty.
    pub fn from_config(config: &RunConfig) -> Result<Self, BackendError> {
        let api_key = read_api_key(&config.endpoint.api_key_env)?;
        Ok(Self::with_transport(
            config,
            api_key,
            Box::new(ReqwestTransport::new()?),
        ))
    }

    pub fn with_transport(
        config: &RunConfig,
        api_key: String,
        transport: Box<dyn HttpTransport>,
    ) -> Self {
        Self {
            endpoint: config.endpoint.clone(),
            api_key,
            policy: RetryPolicy::new(config.max_retries, config.backoff),
            transport,
        }
    }

    /// Replaces the backoff schedule; tests use a zero-delay policy.
    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn request_body(&self, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages()
            .iter()
            .map(|m| json!({ "role": m.speaker.as_str(), "content": m.content }))
            .collect();
        let mut body = json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
        });
        if !self.endpoint.sampling_field.is_empty() {
            body[self.endpoint.sampling_field.as_str()] = json!(request.top_k);
        }
        body
    }
}

fn read_api_key(var: &str) -> Result<String, BackendError> {
    match std::env::var(var) {
        Ok(key) if !key.trim().is_empty() => Ok(key),
        _ => Err(BackendError::Config(format!(
            "API key environment variable {var} is not set"
        ))),
    }
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

fn parse_completion(body: &str) -> Result<(String, Usage), BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))?
        .to_string();
    let usage = Usage {
        prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok((content, usage))
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let started = Instant::now();
        let body = self.request_body(request);
        let ((content, usage), attempts) =
            retry_with_backoff(&self.policy, &std::thread::sleep, |_| {
                let reply = self
                    .transport
                    .post_json(
                        &self.endpoint.url,
                        &self.api_key,
                        &body,
                        request.request_timeout,
                    )
                    .map_err(AttemptError::Transient)?;
                if is_transient_status(reply.status) {
                    return Err(AttemptError::Transient(format!("HTTP {}", reply.status)));
                }
                if !(200..300).contains(&reply.status) {
                    return Err(AttemptError::Fatal(BackendError::Rejected {
                        status: reply.status,
                        body: reply.body,
                    }));
                }
                parse_completion(&reply.body).map_err(AttemptError::Fatal)
            })?;
        Ok(ChatResponse {
            content,
            usage,
            latency: started.elapsed(),
            attempts,
        })
    }
}
