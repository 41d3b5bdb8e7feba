use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{ChatBackend, ChatCall, LlmError, Role};
use crate::http::{HttpClient, HttpFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAiConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    /// Send `response_format: json_schema` and trust the server to enforce
    /// it; otherwise `json_object` mode plus validate-and-retry.
    pub native_json_schema: bool,
    /// Token ids for bias keys given as text. Numeric keys are passed through.
    pub logit_bias_tokens: BTreeMap<String, Vec<u32>>,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key: None,
            timeout_secs: 60,
            native_json_schema: false,
            logit_bias_tokens: BTreeMap::new(),
        }
    }
}

/// Backend for any OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct OpenAiBackend {
    config: OpenAiConfig,
    http: HttpClient,
}

impl OpenAiBackend {
    pub fn new(config: OpenAiConfig) -> Self {
        let http = HttpClient::new(Duration::from_secs(config.timeout_secs.max(1)));
        Self { config, http }
    }

    pub fn config(&self) -> &OpenAiConfig {
        &self.config
    }

    fn role(role: Role) -> &'static str {
        match role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }

    fn token_bias(&self, bias: &BTreeMap<String, f64>) -> Map<String, Value> {
        let mut out = Map::new();
        for (key, weight) in bias {
            // API bounds.
            let weight = weight.clamp(-100.0, 100.0);
            if key.parse::<u32>().is_ok() {
                out.insert(key.clone(), json!(weight));
            } else if let Some(ids) = self.config.logit_bias_tokens.get(key) {
                for id in ids {
                    out.insert(id.to_string(), json!(weight));
                }
            }
        }
        out
    }

    /// Request body for one attempt.
    pub fn request_body(&self, call: ChatCall<'_>) -> Value {
        let req = call.request;
        let mut messages = vec![json!({"role": "system", "content": req.system_prompt})];
        messages.extend(
            req.messages
                .iter()
                .map(|m| json!({"role": Self::role(m.role), "content": m.content})),
        );
        for rejection in call.rejections {
            messages.push(json!({"role": "assistant", "content": rejection.raw_text}));
            messages.push(json!({
                "role": "user",
                "content": format!(
                    "Your previous reply was rejected: {}. Reply again with only a JSON object that satisfies this schema: {}",
                    rejection.reason, call.schema
                )
            }));
        }
        let response_format = if self.config.native_json_schema {
            json!({
                "type": "json_schema",
                "json_schema": {"name": req.schema.as_str(), "schema": call.schema, "strict": true}
            })
        } else {
            json!({"type": "json_object"})
        };
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "response_format": response_format,
            "temperature": req.temperature,
        });
        let bias = self.token_bias(&req.logit_bias);
        if !bias.is_empty() {
            body["logit_bias"] = Value::Object(bias);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, call: ChatCall<'_>) -> Result<String, LlmError> {
        let body = self.request_body(call);
        let bytes = self
            .http
            .post_json(&self.config.endpoint, self.config.api_key.as_deref(), &body)
            .map_err(|f| match f {
                HttpFailure::Transport(e) => LlmError::Transport(e),
                HttpFailure::Status(status, body) => LlmError::Http { status, body },
            })?;
        let value: Value = serde_json::from_slice(&bytes)
            .map_err(|e| LlmError::MalformedResponse(format!("response is not JSON: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
    }

    fn enforces_schema(&self) -> bool {
        self.config.native_json_schema
    }
}
