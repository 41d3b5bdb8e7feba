use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BoundingBox, DetectionBackend, Heatmap, ImageRef, SegmentationBackend, VisionError};
use crate::http::{HttpClient, HttpFailure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpVisionConfig {
    /// POST `{image, query}` → single-channel PNG.
    pub segment_url: Option<String>,
    /// POST `{image, queries}` → `[{label, x, y, width, height, confidence}]`.
    pub detect_url: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

/// Remote segmentation/detection model servers.
#[derive(Debug, Clone)]
pub struct HttpVision {
    config: HttpVisionConfig,
    http: HttpClient,
}

impl HttpVision {
    pub fn new(config: HttpVisionConfig) -> Self {
        let http = HttpClient::new(Duration::from_secs(config.timeout_secs.max(1)));
        Self { config, http }
    }

    fn post(&self, url: &Option<String>, body: &serde_json::Value) -> Result<Vec<u8>, VisionError> {
        let url = url
            .as_deref()
            .ok_or_else(|| VisionError::Transport("endpoint not configured".into()))?;
        self.http.post_json(url, None, body).map_err(|f| match f {
            HttpFailure::Transport(e) => VisionError::Transport(e),
            HttpFailure::Status(status, body) => VisionError::Http { status, body },
        })
    }
}

fn encode_image(image: &ImageRef) -> String {
    base64::engine::general_purpose::STANDARD.encode(image.to_png_bytes())
}

impl SegmentationBackend for HttpVision {
    fn segment_raw(&self, image: &ImageRef, query: &str) -> Result<Heatmap, VisionError> {
        let body = json!({"image": encode_image(image), "query": query});
        let png = self.post(&self.config.segment_url, &body)?;
        Heatmap::from_png_bytes(&png)
    }
}

impl DetectionBackend for HttpVision {
    fn detect_raw(&self, image: &ImageRef, queries: &[String]) -> Result<Vec<BoundingBox>, VisionError> {
        let body = json!({"image": encode_image(image), "queries": queries});
        let bytes = self.post(&self.config.detect_url, &body)?;
        serde_json::from_slice(&bytes).map_err(|e| VisionError::MalformedResponse(e.to_string()))
    }
}
