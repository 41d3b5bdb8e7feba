//! Backend selection from short specs such as `scripted:rules.json`,
//! `openai:gpt-4o-mini`, `fixture:fixtures/vision` or `http://host/segment`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use contact_core::contact::{FileSink, MemorySink, TaskSink, TcpSink};
use contact_core::llm::{LlmGateway, OpenAiBackend, OpenAiConfig, ScriptedBackend};
use contact_core::vision::{
    DetectionBackend, FixtureVision, HttpVision, HttpVisionConfig, SegmentationBackend, VisionGateway,
};
use serde::{Deserialize, Serialize};

use crate::config::{LlmSettings, SinkSettings, VisionSettings};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized {kind} spec {spec:?}; expected {expected}")]
pub struct SpecError {
    kind: &'static str,
    spec: String,
    expected: &'static str,
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmSpec {
    Scripted(PathBuf),
    OpenAi { model: String },
}

impl FromStr for LlmSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s.split_once(':') {
            Some(("scripted", path)) if !path.is_empty() => Ok(LlmSpec::Scripted(path.into())),
            Some(("openai", model)) if !model.is_empty() => Ok(LlmSpec::OpenAi { model: model.into() }),
            _ => Err(SpecError {
                kind: "llm",
                spec: s.into(),
                expected: "scripted:<file> or openai:<model>",
            }),
        }
    }
}

impl fmt::Display for LlmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LlmSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
            LlmSpec::OpenAi { model } => write!(f, "openai:{model}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VisionSpec {
    Fixture(PathBuf),
    Http(String),
}

impl FromStr for VisionSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(VisionSpec::Http(s.into()));
        }
        match s.split_once(':') {
            Some(("fixture", dir)) if !dir.is_empty() => Ok(VisionSpec::Fixture(dir.into())),
            _ => Err(SpecError {
                kind: "vision",
                spec: s.into(),
                expected: "fixture:<dir> or an http(s) URL",
            }),
        }
    }
}

impl fmt::Display for VisionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VisionSpec::Fixture(p) => write!(f, "fixture:{}", p.display()),
            VisionSpec::Http(url) => f.write_str(url),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkSpec {
    File(PathBuf),
    Tcp(String),
    Memory,
}

impl FromStr for SinkSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s.split_once(':') {
            Some(("file", dir)) if !dir.is_empty() => Ok(SinkSpec::File(dir.into())),
            Some(("tcp", addr)) if !addr.is_empty() => Ok(SinkSpec::Tcp(addr.into())),
            None if s == "memory" => Ok(SinkSpec::Memory),
            _ => Err(SpecError {
                kind: "sink",
                spec: s.into(),
                expected: "file:<dir>, tcp:<host:port> or memory",
            }),
        }
    }
}

impl fmt::Display for SinkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SinkSpec::File(p) => write!(f, "file:{}", p.display()),
            SinkSpec::Tcp(addr) => write!(f, "tcp:{addr}"),
            SinkSpec::Memory => f.write_str("memory"),
        }
    }
}

string_serde!(LlmSpec);
string_serde!(VisionSpec);
string_serde!(SinkSpec);

pub fn build_llm(settings: &LlmSettings) -> anyhow::Result<LlmGateway> {
    let backend: Arc<dyn contact_core::llm::ChatBackend> = match &settings.spec {
        LlmSpec::Scripted(path) => Arc::new(
            ScriptedBackend::from_file(path).map_err(|e| anyhow::anyhow!("script {}: {e}", path.display()))?,
        ),
        LlmSpec::OpenAi { model } => {
            let mut config = OpenAiConfig {
                model: model.clone(),
                api_key: settings.api_key.clone(),
                timeout_secs: settings.timeout_secs,
                native_json_schema: settings.native_json_schema,
                logit_bias_tokens: settings.logit_bias_tokens.clone(),
                ..OpenAiConfig::default()
            };
            if let Some(endpoint) = &settings.endpoint {
                config.endpoint = endpoint.clone();
            }
            Arc::new(OpenAiBackend::new(config))
        }
    };
    Ok(LlmGateway::with_builtin_schemas(backend).with_retry_cap(settings.retry_cap))
}

enum Vision {
    Fixture(Arc<FixtureVision>),
    Http(Arc<HttpVision>),
}

fn open_vision(spec: &VisionSpec, timeout_secs: u64, segment: bool) -> anyhow::Result<Vision> {
    Ok(match spec {
        VisionSpec::Fixture(dir) => Vision::Fixture(Arc::new(
            FixtureVision::open(dir).map_err(|e| anyhow::anyhow!("vision fixtures {}: {e}", dir.display()))?,
        )),
        VisionSpec::Http(url) => {
            let (segment_url, detect_url) = if segment {
                (Some(url.clone()), None)
            } else {
                (None, Some(url.clone()))
            };
            Vision::Http(Arc::new(HttpVision::new(HttpVisionConfig {
                segment_url,
                detect_url,
                timeout_secs,
            })))
        }
    })
}

pub fn build_vision(settings: &VisionSettings) -> anyhow::Result<VisionGateway> {
    let segmentation: Arc<dyn SegmentationBackend> = match open_vision(&settings.segmentation, settings.timeout_secs, true)? {
        Vision::Fixture(f) => f,
        Vision::Http(h) => h,
    };
    let detection: Arc<dyn DetectionBackend> = match open_vision(&settings.detection, settings.timeout_secs, false)? {
        Vision::Fixture(f) => f,
        Vision::Http(h) => h,
    };
    Ok(VisionGateway::new(segmentation, detection))
}

pub fn build_sink(settings: &SinkSettings) -> anyhow::Result<Arc<dyn TaskSink>> {
    Ok(match &settings.spec {
        SinkSpec::File(dir) => Arc::new(FileSink::new(dir.clone())?),
        SinkSpec::Tcp(addr) => Arc::new(TcpSink::new(addr.clone(), Duration::from_millis(settings.timeout_ms))),
        SinkSpec::Memory => Arc::new(MemorySink::new()),
    })
}
