//! Chat-completion access with structured (JSON) output enforcement.
//!
//! Every stage of the pipeline talks to the language model through
//! [`LlmGateway::complete_structured`]. A reply is only handed back once it
//! parses as JSON and validates against the schema named in the request.
//! Backends that constrain decoding natively get a single attempt; all others
//! are re-prompted with the validation error until the retry cap is reached.

mod remote;
pub mod schema;
mod scripted;
pub mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use remote::{OpenAiBackend, OpenAiConfig};
pub use schema::{SchemaId, SchemaRegistry};
pub use scripted::{Matcher, ScriptRule, ScriptedBackend};
pub use template::{PromptTemplate, Shot, TemplateError};

/// Default number of attempts for backends without grammar enforcement.
pub const DEFAULT_RETRY_CAP: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("schema {0} is not registered")]
    SchemaNotRegistered(SchemaId),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted reply matches {0:?}")]
    Unmatched(String),
    #[error("reply failed validation after {attempts} attempt(s): {reason}")]
    Validation {
        attempts: u32,
        reason: String,
        raw_text: String,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl LlmError {
    /// True when the backend could not be reached or is refusing service,
    /// as opposed to answering with unusable content.
    pub fn is_unavailable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub schema: SchemaId,
    /// Token text to additive bias. Backends that cannot map a key to a
    /// token ignore it.
    #[serde(default)]
    pub logit_bias: BTreeMap<String, f64>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// A single-turn request at temperature 0.
    pub fn new(system_prompt: impl Into<String>, user: impl Into<String>, schema: impl Into<SchemaId>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages: vec![ChatMessage::user(user)],
            schema: schema.into(),
            logit_bias: BTreeMap::new(),
            temperature: 0.0,
            seed: None,
        }
    }

    pub fn with_logit_bias(mut self, bias: BTreeMap<String, f64>) -> Self {
        self.logit_bias = bias;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Content of the most recent user message, if any.
    pub fn last_user_text(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    fn check(&self) -> Result<(), LlmError> {
        if self.system_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("system prompt is empty".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if let Some((k, _)) = self.logit_bias.iter().find(|(_, v)| !v.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("logit bias for {k:?} is not finite")));
        }
        Ok(())
    }
}

/// A previous reply that failed validation, fed back on re-prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub raw_text: String,
    pub reason: String,
}

/// Everything a backend sees for one attempt.
#[derive(Debug, Clone, Copy)]
pub struct ChatCall<'a> {
    pub request: &'a ChatRequest,
    pub schema: &'a Value,
    pub rejections: &'a [Rejection],
}

pub trait ChatBackend: Send + Sync {
    /// Returns the raw reply text for one attempt.
    fn complete(&self, call: ChatCall<'_>) -> Result<String, LlmError>;

    /// Whether the backend constrains decoding to the schema itself.
    fn enforces_schema(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredReply {
    pub raw_text: String,
    pub parsed: Value,
    pub attempts: u32,
}

/// Shareable handle over a backend plus the schema registry.
#[derive(Clone)]
pub struct LlmGateway {
    backend: Arc<dyn ChatBackend>,
    schemas: Arc<SchemaRegistry>,
    retry_cap: u32,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway")
            .field("schemas", &self.schemas)
            .field("retry_cap", &self.retry_cap)
            .field("enforces_schema", &self.backend.enforces_schema())
            .finish()
    }
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn ChatBackend>, schemas: Arc<SchemaRegistry>) -> Self {
        Self {
            backend,
            schemas,
            retry_cap: DEFAULT_RETRY_CAP,
        }
    }

    /// Gateway over `backend` with the built-in pipeline schemas.
    pub fn with_builtin_schemas(backend: Arc<dyn ChatBackend>) -> Self {
        Self::new(backend, Arc::new(SchemaRegistry::builtin()))
    }

    pub fn with_retry_cap(mut self, cap: u32) -> Self {
        self.retry_cap = cap.max(1);
        self
    }

    pub fn retry_cap(&self) -> u32 {
        self.retry_cap
    }

    pub fn schemas(&self) -> &SchemaRegistry {
        &self.schemas
    }

    pub fn complete_structured(&self, req: &ChatRequest) -> Result<StructuredReply, LlmError> {
        req.check()?;
        let schema = self
            .schemas
            .document(&req.schema)
            .ok_or_else(|| LlmError::SchemaNotRegistered(req.schema.clone()))?;
        let cap = if self.backend.enforces_schema() { 1 } else { self.retry_cap };

        let mut rejections = Vec::new();
        for attempt in 1..=cap {
            let raw_text = self.backend.complete(ChatCall {
                request: req,
                schema,
                rejections: &rejections,
            })?;
            match self.check_reply(&req.schema, &raw_text) {
                Ok(parsed) => {
                    return Ok(StructuredReply {
                        raw_text,
                        parsed,
                        attempts: attempt,
                    })
                }
                Err(reason) => {
                    tracing::debug!(schema = %req.schema, attempt, %reason, "reply rejected");
                    if attempt == cap {
                        return Err(LlmError::Validation {
                            attempts: attempt,
                            reason,
                            raw_text,
                        });
                    }
                    rejections.push(Rejection { raw_text, reason });
                }
            }
        }
        unreachable!("retry cap is at least one")
    }

    /// Like [`complete_structured`](Self::complete_structured) but also
    /// deserializes the validated value.
    pub fn complete_as<T: serde::de::DeserializeOwned>(&self, req: &ChatRequest) -> Result<(T, StructuredReply), LlmError> {
        let reply = self.complete_structured(req)?;
        let typed = serde_json::from_value(reply.parsed.clone()).map_err(|e| LlmError::Validation {
            attempts: reply.attempts,
            reason: format!("validated reply does not fit the expected shape: {e}"),
            raw_text: reply.raw_text.clone(),
        })?;
        Ok((typed, reply))
    }

    fn check_reply(&self, schema: &SchemaId, raw: &str) -> Result<Value, String> {
        let value: Value = serde_json::from_str(strip_code_fence(raw))
            .map_err(|e| format!("reply is not JSON: {e}"))?;
        self.schemas.validate(schema, &value)?;
        Ok(value)
    }
}

/// Removes a surrounding Markdown code fence, which chat models add even
/// in JSON mode.
fn strip_code_fence(raw: &str) -> &str {
    let trimmed = raw.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}
