use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChatBackend, ChatCall, LlmError, SchemaId};

/// How a scripted rule selects requests, tested against the last user
/// message of the request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    Any,
    Exact(String),
    Contains(String),
}

impl Matcher {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Exact(s) => text == s,
            Matcher::Contains(s) => text.contains(s.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRule {
    /// Restricts the rule to one schema; `None` matches every schema.
    pub schema: Option<SchemaId>,
    pub matcher: Matcher,
    pub reply: String,
}

impl ScriptRule {
    pub fn new(matcher: Matcher, reply: impl Into<String>) -> Self {
        Self {
            schema: None,
            matcher,
            reply: reply.into(),
        }
    }

    pub fn for_schema(schema: impl Into<SchemaId>, matcher: Matcher, reply: impl Into<String>) -> Self {
        Self {
            schema: Some(schema.into()),
            matcher,
            reply: reply.into(),
        }
    }
}

/// On-disk rule: `{"schema": "intent", "match": "*", "reply": {...}}`.
/// `match` is `"*"`, a plain string (exact), or `{"contains": "..."}`;
/// `reply` is either the raw text or a JSON value serialized compactly.
#[derive(Serialize, Deserialize)]
struct RuleFile {
    #[serde(default)]
    schema: Option<SchemaId>,
    #[serde(rename = "match")]
    matcher: MatcherFile,
    reply: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatcherFile {
    Text(String),
    Contains { contains: String },
    Exact { exact: String },
}

impl From<RuleFile> for ScriptRule {
    fn from(f: RuleFile) -> Self {
        let matcher = match f.matcher {
            MatcherFile::Text(s) if s == "*" => Matcher::Any,
            MatcherFile::Text(s) | MatcherFile::Exact { exact: s } => Matcher::Exact(s),
            MatcherFile::Contains { contains } => Matcher::Contains(contains),
        };
        let reply = match f.reply {
            Value::String(s) => s,
            other => other.to_string(),
        };
        ScriptRule {
            schema: f.schema,
            matcher,
            reply,
        }
    }
}

/// Deterministic offline backend. Rules are tried in registration order and
/// the first match wins; an unmatched request is an error.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self {
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let rules: Vec<RuleFile> = serde_json::from_str(text)?;
        Ok(Self::new(rules.into_iter().map(Into::into).collect()))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }

    /// Number of completions requested so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reply_for(&self, schema: &SchemaId, user_text: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.schema.as_ref().is_none_or(|s| s == schema) && r.matcher.matches(user_text))
            .map(|r| r.reply.as_str())
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, call: ChatCall<'_>) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = call.request.last_user_text().unwrap_or_default();
        self.reply_for(&call.request.schema, text)
            .map(str::to_owned)
            .ok_or_else(|| LlmError::Unmatched(text.to_owned()))
    }
}
