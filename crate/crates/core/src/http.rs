//! Blocking JSON-over-HTTP with retry, shared by the chat and embedding clients.

use std::time::Duration;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    /// Full-jitter exponential delay before retry number `attempt` (1-based).
    fn delay(&self, attempt: u32) -> Duration {
        let exp = self
            .backoff_base
            .saturating_mul(1u32.checked_shl(attempt - 1).unwrap_or(u32::MAX))
            .min(self.backoff_cap);
        let millis = exp.as_millis() as u64;
        if millis == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rand::thread_rng().gen_range(millis / 2..=millis))
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

pub(crate) struct JsonClient {
    http: reqwest::blocking::Client,
    bearer: Option<String>,
    retry: RetryPolicy,
}

impl JsonClient {
    pub(crate) fn new(
        retry: RetryPolicy,
        bearer: Option<String>,
        timeout: Duration,
    ) -> Result<Self> {
        retry.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            http,
            bearer,
            retry,
        })
    }

    pub(crate) fn post<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            match self.post_once(url, body) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(msg)) => return Err(Error::Transport(msg)),
                Err(Failure::Retryable(msg)) => {
                    log::debug!("POST {url} attempt {attempt} failed: {msg}");
                    last = msg;
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        Err(Error::Transport(format!(
            "POST {url} failed after {} attempts: {last}",
            self.retry.max_attempts
        )))
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> std::result::Result<R, Failure> {
        let mut req = self.http.post(url).json(body);
        if let Some(token) = &self.bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            return resp
                .json::<R>()
                .map_err(|e| Failure::Fatal(format!("malformed response body: {e}")));
        }
        let text = resp.text().unwrap_or_default();
        let msg = format!(
            "HTTP {status}: {}",
            text.chars().take(200).collect::<String>()
        );
        if status.as_u16() == 429 || status.is_server_error() {
            Err(Failure::Retryable(msg))
        } else {
            Err(Failure::Fatal(msg))
        }
    }
}
