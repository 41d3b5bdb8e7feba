use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use contact_core::contact::ResolverSettings;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{LlmSpec, SinkSpec, VisionSpec};

/// Prefix of every environment override.
pub const ENV_PREFIX: &str = "CONTACT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// `scripted:<rules.json>` or `openai:<model>`.
    pub spec: LlmSpec,
    pub endpoint: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub native_json_schema: bool,
    pub retry_cap: u32,
    pub logit_bias_tokens: BTreeMap<String, Vec<u32>>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            spec: LlmSpec::OpenAi { model: "gpt-3.5-turbo".into() },
            endpoint: None,
            api_key: None,
            timeout_secs: 60,
            native_json_schema: false,
            retry_cap: contact_core::llm::DEFAULT_RETRY_CAP,
            logit_bias_tokens: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionSettings {
    /// `fixture:<dir>` or an `http(s)://` URL.
    pub segmentation: VisionSpec,
    pub detection: VisionSpec,
    pub timeout_secs: u64,
}

impl Default for VisionSettings {
    fn default() -> Self {
        Self {
            segmentation: VisionSpec::Fixture("fixtures/vision".into()),
            detection: VisionSpec::Fixture("fixtures/vision".into()),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkSettings {
    /// `file:<dir>`, `tcp:<host:port>` or `memory`.
    pub spec: SinkSpec,
    pub timeout_ms: u64,
}

impl Default for SinkSettings {
    fn default() -> Self {
        Self {
            spec: SinkSpec::File("tasks".into()),
            timeout_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    /// Built console assets, served at `/`.
    pub static_dir: Option<PathBuf>,
    /// JSON prompt set replacing the built-in prompts.
    pub prompts: Option<PathBuf>,
    pub llm: LlmSettings,
    pub vision: VisionSettings,
    pub contact: ResolverSettings,
    pub sink: SinkSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
            prompts: None,
            llm: LlmSettings::default(),
            vision: VisionSettings::default(),
            contact: ResolverSettings::default(),
            sink: SinkSettings::default(),
        }
    }
}

fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Invalid {
        key: key.to_string(),
        message: e.to_string(),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid {
            key: "config".into(),
            message: e.to_string(),
        })
    }

    /// Reads the file when given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                Self::from_toml(&text).map_err(|e| ConfigError::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    /// Overrides from `CONTACT_*` variables, looked up through `var`.
    ///
    /// | variable | field |
    /// |---|---|
    /// | `CONTACT_BIND` | `bind` |
    /// | `CONTACT_STATIC_DIR` | `static_dir` |
    /// | `CONTACT_PROMPTS` | `prompts` |
    /// | `CONTACT_LLM` | `llm.spec` |
    /// | `CONTACT_LLM_ENDPOINT` | `llm.endpoint` |
    /// | `CONTACT_LLM_API_KEY` | `llm.api_key` |
    /// | `CONTACT_SEG`, `CONTACT_DET` | `vision.segmentation`, `vision.detection` |
    /// | `CONTACT_FIXTURE_DIR` | both vision backends as `fixture:<dir>` |
    /// | `CONTACT_TRAJECTORY_DURATION` | `contact.duration` |
    /// | `CONTACT_SAMPLE_RATE` | `contact.sample_rate` |
    /// | `CONTACT_FALLBACK_RADIUS` | `contact.fallback_radius` |
    /// | `CONTACT_SINK` | `sink.spec` |
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |name: &str| var(&format!("{ENV_PREFIX}{name}")).map(|v| (format!("{ENV_PREFIX}{name}"), v));
        if let Some((_, v)) = get("BIND") {
            self.bind = v;
        }
        if let Some((_, v)) = get("STATIC_DIR") {
            self.static_dir = Some(v.into());
        }
        if let Some((_, v)) = get("PROMPTS") {
            self.prompts = Some(v.into());
        }
        if let Some((k, v)) = get("LLM") {
            self.llm.spec = parsed(&k, &v)?;
        }
        if let Some((_, v)) = get("LLM_ENDPOINT") {
            self.llm.endpoint = Some(v);
        }
        if let Some((_, v)) = get("LLM_API_KEY") {
            self.llm.api_key = Some(v);
        }
        if let Some((_, v)) = get("FIXTURE_DIR") {
            self.vision.segmentation = VisionSpec::Fixture(v.clone().into());
            self.vision.detection = VisionSpec::Fixture(v.into());
        }
        if let Some((k, v)) = get("SEG") {
            self.vision.segmentation = parsed(&k, &v)?;
        }
        if let Some((k, v)) = get("DET") {
            self.vision.detection = parsed(&k, &v)?;
        }
        if let Some((k, v)) = get("TRAJECTORY_DURATION") {
            self.contact.duration = parsed(&k, &v)?;
        }
        if let Some((k, v)) = get("SAMPLE_RATE") {
            self.contact.sample_rate = parsed(&k, &v)?;
        }
        if let Some((k, v)) = get("FALLBACK_RADIUS") {
            self.contact.fallback_radius = parsed(&k, &v)?;
        }
        if let Some((k, v)) = get("SINK") {
            self.sink.spec = parsed(&k, &v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                message,
            })
        };
        let c = &self.contact;
        if !(c.duration.is_finite() && c.duration > 0.0) {
            return bad("contact.duration", format!("{} must be positive", c.duration));
        }
        if !(c.sample_rate.is_finite() && c.sample_rate > 0.0) {
            return bad("contact.sample_rate", format!("{} must be positive", c.sample_rate));
        }
        if self.llm.retry_cap == 0 {
            return bad("llm.retry_cap", "must be at least 1".into());
        }
        Ok(())
    }
}
