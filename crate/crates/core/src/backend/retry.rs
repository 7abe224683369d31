use std::time::Duration;

use rand::Rng;

use super::BackendError;
use crate::config::BackoffConfig;

/// Exponential backoff: `base * 2^retry`, jittered, capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: f64,
}

impl RetryPolicy {
    pub fn new(max_retries: u32, backoff: BackoffConfig) -> Self {
        Self {
            max_retries,
            base_delay: Duration::from_millis(backoff.base_delay_ms),
            max_delay: Duration::from_millis(backoff.max_delay_ms),
            jitter: backoff.jitter,
        }
    }

    /// No waiting between attempts; used by the scripted backend.
    pub fn immediate(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: 0.0,
        }
    }

    /// Delay before retry number `retry` (0-based), given a jitter sample in [-1, 1].
    pub fn delay(&self, retry: u32, jitter_sample: f64) -> Duration {
        let factor = 2f64.powi(retry.min(30) as i32);
        let raw = self.base_delay.as_secs_f64() * factor;
        let jittered = raw * (1.0 + self.jitter * jitter_sample.clamp(-1.0, 1.0));
        Duration::from_secs_f64(jittered.max(0.0)).min(self.max_delay)
    }
}

pub enum AttemptError {
    Transient(String),
    Fatal(BackendError),
}

/// Runs `op` until it succeeds, fails fatally, or exhausts `max_retries`
/// retries. Returns the value and the number of attempts made.
pub fn retry_with_backoff<T>(
    policy: &RetryPolicy,
    sleep: &dyn Fn(Duration),
    mut op: impl FnMut(u32) -> Result<T, AttemptError>,
) -> Result<(T, u32), BackendError> {
    let mut attempt: u32 = 0;
    loop {
        attempt += 1;
        match op(attempt) {
            Ok(value) => return Ok((value, attempt)),
            Err(AttemptError::Fatal(err)) => return Err(err),
            Err(AttemptError::Transient(message)) => {
                if attempt > policy.max_retries {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        message,
                    });
                }
                let sample = if policy.jitter > 0.0 {
                    rand::rng().random_range(-1.0..=1.0)
                } else {
                    0.0
                };
                let delay = policy.delay(attempt - 1, sample);
                tracing::warn!(attempt, ?delay, %message, "transient backend failure, retrying");
                sleep(delay);
            }
        }
    }
}
