//! Decomposing candidate summaries into summary content units (SCUs).
//!
//! The model-backed extractor sends the versioned SCU prompt as the system
//! message and the summary as the user message, then splits the reply on
//! `#`. Replies are cached by the exact request bytes, so a second call with
//! the same prompt version, model and text never reaches the network.

mod chat;
mod offline;
pub mod prompts;

use std::sync::Arc;

pub use chat::{
    ChatBackend, ChatMessage, ChatRequest, ChatResponse, HttpChatClient, Role, Usage, API_KEY_ENV,
};
pub use offline::split_clauses;
pub use prompts::{GenerationPrompt, ShotExample, PROMPT_VERSION};

use crate::cache::{Cache, CacheKey, CacheKind};
use crate::corpus::{CandidateSummary, ScuRecord};
use crate::error::{Error, Result};
use crate::http::RetryPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    pub model_id: String,
    pub temperature: f64,
    pub shots: u8,
    pub prompt_version: String,
    pub retry: RetryPolicy,
    /// Additional worked examples, required for 3-shot prompts.
    pub extra_examples: Vec<ShotExample>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o-mini".into(),
            temperature: 0.0,
            shots: 1,
            prompt_version: PROMPT_VERSION.into(),
            retry: RetryPolicy::default(),
            extra_examples: Vec::new(),
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        self.retry.validate()?;
        prompts::scu_prompt(&self.prompt_version, self.shots, &self.extra_examples).map(|_| ())
    }
}

/// Splits a model reply on `#`, trimming segments and dropping empty ones.
pub fn parse_scu_reply(reply: &str) -> Vec<String> {
    reply
        .split('#')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn to_records(doc_id: &str, candidate_id: &str, texts: Vec<String>) -> Vec<ScuRecord> {
    texts
        .into_iter()
        .enumerate()
        .map(|(index, text)| ScuRecord {
            doc_id: doc_id.to_string(),
            candidate_id: candidate_id.to_string(),
            index,
            text,
        })
        .collect()
}

pub trait ScuExtractor: Send + Sync {
    fn extract(&self, doc_id: &str, candidate: &CandidateSummary) -> Result<Vec<ScuRecord>>;

    /// Short identity string recorded in run manifests.
    fn describe(&self) -> String;
}

/// Deterministic extractor built on [`split_clauses`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineExtractor;

pub fn extract_scus_offline(doc_id: &str, candidate: &CandidateSummary) -> Vec<ScuRecord> {
    to_records(
        doc_id,
        &candidate.candidate_id,
        split_clauses(&candidate.text),
    )
}

impl ScuExtractor for OfflineExtractor {
    fn extract(&self, doc_id: &str, candidate: &CandidateSummary) -> Result<Vec<ScuRecord>> {
        Ok(extract_scus_offline(doc_id, candidate))
    }

    fn describe(&self) -> String {
        "offline-clauses".into()
    }
}

pub struct LlmExtractor {
    cfg: ExtractorConfig,
    system_prompt: String,
    backend: Arc<dyn ChatBackend>,
    cache: Option<Cache>,
}

impl LlmExtractor {
    pub fn new(
        cfg: ExtractorConfig,
        backend: Arc<dyn ChatBackend>,
        cache: Option<Cache>,
    ) -> Result<Self> {
        cfg.validate()?;
        let system_prompt =
            prompts::scu_prompt(&cfg.prompt_version, cfg.shots, &cfg.extra_examples)?;
        Ok(Self {
            cfg,
            system_prompt,
            backend,
            cache,
        })
    }

    pub fn request_for(&self, summary: &str) -> ChatRequest {
        ChatRequest {
            model: self.cfg.model_id.clone(),
            temperature: self.cfg.temperature,
            messages: vec![
                ChatMessage::system(self.system_prompt.clone()),
                ChatMessage::user(summary),
            ],
        }
    }

    fn reply(&self, request: &ChatRequest) -> Result<String> {
        let key = CacheKey::new(CacheKind::Scu, &self.cfg.model_id, &request.to_bytes());
        if let Some(cache) = &self.cache {
            let hit = cache.get_decoded(&key, |b| String::from_utf8(b.to_vec()).ok())?;
            if let Some(reply) = hit {
                return Ok(reply);
            }
        }
        let reply = self.backend.complete(request)?.content;
        if let Some(cache) = &self.cache {
            cache.put(&key, reply.as_bytes())?;
        }
        Ok(reply)
    }
}

impl ScuExtractor for LlmExtractor {
    fn extract(&self, doc_id: &str, candidate: &CandidateSummary) -> Result<Vec<ScuRecord>> {
        let wrap = |message: String| Error::Extraction {
            doc_id: doc_id.to_string(),
            candidate_id: candidate.candidate_id.clone(),
            message,
        };
        if candidate.text.trim().is_empty() {
            return Err(wrap("candidate text is empty".into()));
        }
        let request = self.request_for(&candidate.text);
        let reply = self.reply(&request).map_err(|e| wrap(e.to_string()))?;
        let scus = parse_scu_reply(&reply);
        if scus.is_empty() {
            log::warn!(
                "{doc_id}/{}: extractor reply contained no SCUs",
                candidate.candidate_id
            );
        }
        Ok(to_records(doc_id, &candidate.candidate_id, scus))
    }

    fn describe(&self) -> String {
        format!(
            "llm:{}:shots={}:temperature={}:prompt={}",
            self.cfg.model_id, self.cfg.shots, self.cfg.temperature, self.cfg.prompt_version
        )
    }
}

#[derive(Debug, Default)]
pub struct GenerationOutcome {
    pub candidates: Vec<CandidateSummary>,
    /// `(model_id, error message)` for each model that failed.
    pub failures: Vec<(String, String)>,
}

/// Builds the generation request: the prompt, a blank line, then the article,
/// all in one user message.
pub fn generation_request(
    article: &str,
    prompt: GenerationPrompt,
    model_id: &str,
    cfg: &ExtractorConfig,
) -> Result<ChatRequest> {
    let instruction = prompt.text(&cfg.prompt_version)?;
    Ok(ChatRequest {
        model: model_id.to_string(),
        temperature: cfg.temperature,
        messages: vec![ChatMessage::user(format!("{instruction}\n\n{article}"))],
    })
}

/// One candidate per model; the candidate id and generator id are the model id.
/// Models that fail are reported, not fatal.
pub fn generate_candidates(
    article: &str,
    prompt: GenerationPrompt,
    models: &[String],
    cfg: &ExtractorConfig,
    backend: &dyn ChatBackend,
    cache: Option<&Cache>,
) -> Result<GenerationOutcome> {
    let mut out = GenerationOutcome::default();
    for model in models {
        let request = generation_request(article, prompt, model, cfg)?;
        let key = CacheKey::new(CacheKind::Generation, model, &request.to_bytes());
        let cached = match cache {
            Some(c) => c.get_decoded(&key, |b| String::from_utf8(b.to_vec()).ok())?,
            None => None,
        };
        let text = match cached {
            Some(t) => Ok(t),
            None => backend
                .complete(&request)
                .map(|r| r.content.trim().to_string()),
        };
        match text {
            Ok(t) if !t.is_empty() => {
                if let Some(c) = cache {
                    c.put(&key, t.as_bytes())?;
                }
                out.candidates
                    .push(CandidateSummary::new(model.clone(), model.clone(), t));
            }
            Ok(_) => out
                .failures
                .push((model.clone(), "empty completion".into())),
            Err(e) => out.failures.push((model.clone(), e.to_string())),
        }
    }
    Ok(out)
}
