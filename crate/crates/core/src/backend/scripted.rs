use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::retry::{retry_with_backoff, AttemptError, RetryPolicy};
use super::{whitespace_tokens, BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::types::Usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedFailure {
    Transient,
    Fatal,
}

/// One transcript position: a canned response or an injected failure.
///
/// On disk a response is a bare JSON string and a failure is
/// `{"fail": "transient"}` or `{"fail": "fatal"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Response(String),
    Failure { fail: ScriptedFailure },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedTranscript {
    entries: Vec<ScriptEntry>,
}

impl ScriptedTranscript {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            responses
                .into_iter()
                .map(|r| ScriptEntry::Response(r.into()))
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| BackendError::TranscriptLoad(e.to_string()))?;
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::TranscriptLoad(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

struct Queue {
    entries: VecDeque<ScriptEntry>,
    consumed: usize,
}

/// Replays a transcript strictly in order.
///
/// The queue lock is held for a whole `complete` call so a retry consumes the
/// next entry of the same call. Sharing one transcript between independent
/// agents running concurrently is a test-authoring error: the interleaving
/// decides who gets which response.
pub struct ScriptedBackend {
    queue: Mutex<Queue>,
    policy: RetryPolicy,
}

impl ScriptedBackend {
    pub fn new(transcript: ScriptedTranscript, max_retries: u32) -> Self {
        Self {
            queue: Mutex::new(Queue {
                entries: transcript.entries.into(),
                consumed: 0,
            }),
            policy: RetryPolicy::immediate(max_retries),
        }
    }

    pub fn consumed(&self) -> usize {
        self.queue.lock().expect("transcript lock").consumed
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("transcript lock").entries.len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let started = Instant::now();
        let mut queue = self.queue.lock().expect("transcript lock");
        let (content, attempts) = retry_with_backoff(&self.policy, &|_| {}, |_| {
            let Some(entry) = queue.entries.pop_front() else {
                return Err(AttemptError::Fatal(BackendError::TranscriptExhausted {
                    consumed: queue.consumed,
                }));
            };
            queue.consumed += 1;
            match entry {
                ScriptEntry::Response(text) => Ok(text),
                ScriptEntry::Failure {
                    fail: ScriptedFailure::Transient,
                } => Err(AttemptError::Transient(format!(
                    "injected transient failure at position {}",
                    queue.consumed
                ))),
                ScriptEntry::Failure {
                    fail: ScriptedFailure::Fatal,
                } => Err(AttemptError::Fatal(BackendError::ScriptedFatal {
                    position: queue.consumed,
                })),
            }
        })?;
        drop(queue);

        let prompt_tokens = request
            .messages()
            .iter()
            .map(|m| whitespace_tokens(&m.content))
            .sum();
        Ok(ChatResponse {
            usage: Usage {
                prompt_tokens,
                completion_tokens: whitespace_tokens(&content),
            },
            content,
            latency: started.elapsed(),
            attempts,
        })
    }
}
