//! Chat-completions wire types and client.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};

pub const API_KEY_ENV: &str = "SCURANK_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Field order is fixed by declaration order, so identical requests
/// serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("chat request serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: Option<String>,
    pub usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

impl TryFrom<WireResponse> for ChatResponse {
    type Error = Error;

    fn try_from(w: WireResponse) -> Result<Self> {
        let choice = w
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Transport("chat response has no choices".into()))?;
        Ok(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason,
            usage: w.usage,
        })
    }
}

/// Anything that can answer a chat request. The HTTP client is the real
/// implementation; tests substitute in-process fakes.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;
}

pub struct HttpChatClient {
    url: String,
    client: JsonClient,
}

impl HttpChatClient {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`;
    /// requests go to `<base_url>/chat/completions`. The bearer token is
    /// read from `SCURANK_API_KEY` when set.
    pub fn new(base_url: &str, retry: RetryPolicy) -> Result<Self> {
        let bearer = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(Self {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            client: JsonClient::new(retry, bearer, Duration::from_secs(120))?,
        })
    }
}

impl ChatBackend for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let wire: WireResponse = self.client.post(&self.url, request)?;
        wire.try_into()
    }
}
