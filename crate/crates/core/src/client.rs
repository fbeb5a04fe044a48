//! Shared plumbing for external model clients (LLM, MT, QE, embeddings).

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("client unreachable: {0}")]
    Unreachable(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    /// Extra rounds allowed when a provider keeps returning duplicates.
    pub max_duplicate_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
            max_duplicate_retries: 2,
        }
    }
}

impl RetryPolicy {
    /// No sleeping between attempts. For tests and stub clients.
    pub fn immediate() -> Self {
        Self { initial_backoff: Duration::ZERO, ..Self::default() }
    }

    /// Calls `op` until it succeeds or attempts run out, sleeping with
    /// exponential backoff in between. Returns the last error.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, ClientError>) -> Result<T, ClientError> {
        let mut delay = self.initial_backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(err) if attempt >= self.max_attempts.max(1) => return Err(err),
                Err(err) => {
                    tracing::debug!(attempt, error = %err, "client call failed; retrying");
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    delay = delay.mul_f64(self.multiplier);
                }
            }
        }
    }
}
