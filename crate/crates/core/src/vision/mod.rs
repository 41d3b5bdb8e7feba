//! Language-grounded segmentation and open-set detection behind backend
//! traits, with the post-processing every caller relies on: heatmaps are
//! upscaled to the image and kept in `[0, 1]`, boxes are clipped to the image
//! and grouped per query, best first.

mod fixture;
mod remote;

use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use image::{ImageBuffer, ImageFormat, Luma, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{query_slug, FixtureVision};
pub use remote::{HttpVision, HttpVisionConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("vision backend unreachable: {0}")]
    Transport(String),
    #[error("vision backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed vision response: {0}")]
    MalformedResponse(String),
    #[error("segmentation for {query:?} is all zeros")]
    DegenerateHeatmap { query: String },
    #[error("no fixture for image {image:?} and query {query:?}")]
    MissingFixture { image: String, query: String },
    #[error("invalid heatmap: {0}")]
    InvalidHeatmap(String),
    #[error("detection needs at least one query")]
    EmptyQueries,
    #[error("image error: {0}")]
    Image(String),
}

impl VisionError {
    pub fn is_unavailable(&self) -> bool {
        match self {
            VisionError::Transport(_) => true,
            VisionError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// An RGB frame with a stable identifier used to key fixtures.
#[derive(Debug, Clone)]
pub struct ImageRef {
    id: String,
    pixels: Arc<RgbImage>,
}

impl ImageRef {
    pub fn new(id: impl Into<String>, pixels: RgbImage) -> Result<Self, VisionError> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(VisionError::Image("image has zero extent".into()));
        }
        Ok(Self {
            id: id.into(),
            pixels: Arc::new(pixels),
        })
    }

    /// Blank image, handy when only the dimensions matter.
    pub fn blank(id: impl Into<String>, width: u32, height: u32) -> Result<Self, VisionError> {
        Self::new(id, RgbImage::new(width, height))
    }

    pub fn from_png_bytes(id: impl Into<String>, bytes: &[u8]) -> Result<Self, VisionError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| VisionError::Image(e.to_string()))?;
        Self::new(id, img.to_rgb8())
    }

    pub fn open(id: impl Into<String>, path: &Path) -> Result<Self, VisionError> {
        let img = image::open(path).map_err(|e| VisionError::Image(format!("{}: {e}", path.display())))?;
        Self::new(id, img.to_rgb8())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.pixels
            .write_to(&mut out, ImageFormat::Png)
            .expect("encoding an in-memory RGB image cannot fail");
        out.into_inner()
    }
}

/// Row-major activation map with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidHeatmap("zero extent".into()));
        }
        if values.len() != width as usize * height as usize {
            return Err(VisionError::InvalidHeatmap(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(VisionError::InvalidHeatmap(format!("value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![0.0; width as usize * height as usize]).expect("valid extent")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: f32) {
        assert!((0.0..=1.0).contains(&value), "heatmap value {value} outside [0, 1]");
        self.values[v as usize * self.width as usize + u as usize] = value;
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Bilinear resampling to the given size; identity when sizes match.
    pub fn upscale_to(&self, width: u32, height: u32) -> Heatmap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let src: ImageBuffer<Luma<f32>, Vec<f32>> =
            ImageBuffer::from_raw(self.width, self.height, self.values.clone()).expect("sized buffer");
        let resized = image::imageops::resize(&src, width, height, image::imageops::FilterType::Triangle);
        let values = resized.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Heatmap { width, height, values }
    }

    /// Decodes a single-channel PNG; 16-bit samples map as `value / 65535`,
    /// 8-bit as `value / 255`.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| VisionError::InvalidHeatmap(e.to_string()))?;
        let gray = img.to_luma16();
        let (w, h) = gray.dimensions();
        let values = gray.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect();
        Self::new(w, h, values)
    }

    pub fn to_png16_bytes(&self) -> Vec<u8> {
        let raw: Vec<u16> = self.values.iter().map(|v| (v * 65535.0).round() as u16).collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, raw).expect("sized buffer");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encode");
        out.into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub label: String,
    /// Left edge in pixels.
    pub x: f64,
    /// Top edge in pixels.
    pub y: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl BoundingBox {
    pub fn new(label: impl Into<String>, x: f64, y: f64, width: f64, height: f64, confidence: f64) -> Self {
        Self {
            label: label.into(),
            x,
            y,
            width,
            height,
            confidence,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    /// Intersection with the image rectangle, or `None` when nothing of
    /// positive area remains.
    pub fn clipped(&self, image_width: u32, image_height: u32) -> Option<BoundingBox> {
        let values = [self.x, self.y, self.width, self.height, self.confidence];
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let left = self.x.max(0.0);
        let top = self.y.max(0.0);
        let right = (self.x + self.width).min(image_width as f64);
        let bottom = (self.y + self.height).min(image_height as f64);
        if right <= left || bottom <= top {
            return None;
        }
        Some(BoundingBox {
            label: self.label.clone(),
            x: left,
            y: top,
            width: right - left,
            height: bottom - top,
            confidence: self.confidence.clamp(0.0, 1.0),
        })
    }
}

pub trait SegmentationBackend: Send + Sync {
    /// Raw activation map for `query`, at any resolution.
    fn segment_raw(&self, image: &ImageRef, query: &str) -> Result<Heatmap, VisionError>;
}

pub trait DetectionBackend: Send + Sync {
    /// Raw boxes for all queries; each box is labeled with the query it
    /// answers.
    fn detect_raw(&self, image: &ImageRef, queries: &[String]) -> Result<Vec<BoundingBox>, VisionError>;
}

#[derive(Clone)]
pub struct VisionGateway {
    segmentation: Arc<dyn SegmentationBackend>,
    detection: Arc<dyn DetectionBackend>,
}

impl std::fmt::Debug for VisionGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VisionGateway").finish_non_exhaustive()
    }
}

impl VisionGateway {
    pub fn new(segmentation: Arc<dyn SegmentationBackend>, detection: Arc<dyn DetectionBackend>) -> Self {
        Self {
            segmentation,
            detection,
        }
    }

    /// Heatmap at the image's resolution. An all-zero map is reported as
    /// [`VisionError::DegenerateHeatmap`].
    pub fn segment(&self, image: &ImageRef, query: &str) -> Result<Heatmap, VisionError> {
        let raw = self.segmentation.segment_raw(image, query)?;
        let map = raw.upscale_to(image.width(), image.height());
        if map.is_degenerate() {
            return Err(VisionError::DegenerateHeatmap { query: query.to_string() });
        }
        Ok(map)
    }

    /// Boxes grouped by query in query order, highest confidence first within
    /// a group, clipped to the image. A query with no hits contributes
    /// nothing.
    pub fn detect(&self, image: &ImageRef, queries: &[String]) -> Result<Vec<BoundingBox>, VisionError> {
        if queries.is_empty() {
            return Err(VisionError::EmptyQueries);
        }
        let raw = self.detection.detect_raw(image, queries)?;
        let mut out = Vec::with_capacity(raw.len());
        let mut seen = std::collections::HashSet::new();
        for query in queries {
            if !seen.insert(query.as_str()) {
                continue;
            }
            let mut group: Vec<BoundingBox> = raw
                .iter()
                .filter(|b| b.label == *query)
                .filter_map(|b| b.clipped(image.width(), image.height()))
                .collect();
            group.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            out.extend(group);
        }
        Ok(out)
    }

    /// The highest-confidence box for `query`, if any.
    pub fn best_box(&self, image: &ImageRef, query: &str) -> Result<Option<BoundingBox>, VisionError> {
        Ok(self.detect(image, &[query.to_string()])?.into_iter().next())
    }
}
