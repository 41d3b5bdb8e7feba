use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::BenchError;
use crate::prediction::{PixelPoint, PositionType};
use crate::vision::ImageRef;

/// Acceptable contact area: `true` where the prediction counts as a success.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize, "mask extent");
        Self { width, height, bits }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height).flat_map(|v| (0..width).map(move |u| (u, v))).map(|(u, v)| f(u, v)).collect();
        Self { width, height, bits }
    }

    /// Positive wherever the grayscale value is non-zero.
    pub fn open(path: &Path) -> Result<Self, BenchError> {
        let img = image::open(path)
            .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?
            .into_luma8();
        let (width, height) = img.dimensions();
        Ok(Self {
            width,
            height,
            bits: img.into_raw().into_iter().map(|p| p > 0).collect(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.within(self.width, self.height) && self.bits[p.v as usize * self.width as usize + p.u as usize]
    }

    pub fn positive_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn area_fraction(&self) -> f64 {
        self.positive_count() as f64 / self.bits.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    /// Position in the manifest.
    pub index: usize,
    /// Image file stem; vision fixtures are keyed by it.
    pub id: String,
    pub image_path: PathBuf,
    pub prompt: String,
    pub category: PositionType,
    pub mask: Mask,
}

impl DatasetRecord {
    pub fn load_image(&self) -> Result<ImageRef, BenchError> {
        ImageRef::open(self.id.clone(), &self.image_path).map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn width(&self) -> u32 {
        self.mask.width()
    }

    pub fn height(&self) -> u32 {
        self.mask.height()
    }
}

/// Success iff the mask is positive at the point.
pub fn score_prediction(record: &DatasetRecord, p: PixelPoint) -> bool {
    record.mask.contains(p)
}

#[derive(Deserialize)]
struct ManifestLine {
    image: PathBuf,
    mask: PathBuf,
    prompt: String,
    category: String,
}

fn parse_category(s: &str) -> Option<PositionType> {
    match s.to_ascii_lowercase().as_str() {
        "absolute" => Some(PositionType::Absolute),
        "relative" => Some(PositionType::Relative),
        _ => None,
    }
}

/// Reads a JSON Lines manifest of `{image, mask, prompt, category}` with
/// paths relative to the manifest. Every record is validated.
pub fn load_dataset(manifest: &Path) -> Result<Vec<DatasetRecord>, BenchError> {
    let text =
        std::fs::read_to_string(manifest).map_err(|e| BenchError::Io(format!("{}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| BenchError::Manifest { line: n + 1, message };
        let entry: ManifestLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let category = parse_category(&entry.category)
            .ok_or_else(|| bad(format!("category {:?} is neither Absolute nor Relative", entry.category)))?;
        if entry.prompt.trim().is_empty() {
            return Err(bad("empty prompt".into()));
        }
        let image_path = base.join(&entry.image);
        let id = image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| bad("image path has no file name".into()))?;
        let (width, height) = image::image_dimensions(&image_path)
            .map_err(|e| BenchError::Io(format!("{}: {e}", image_path.display())))?;
        let mask = Mask::open(&base.join(&entry.mask))?;
        if (mask.width(), mask.height()) != (width, height) {
            return Err(BenchError::DimensionMismatch {
                record: id,
                image: (width, height),
                mask: (mask.width(), mask.height()),
            });
        }
        if mask.positive_count() == 0 {
            return Err(BenchError::EmptyMask { record: id });
        }
        records.push(DatasetRecord {
            index: records.len(),
            id,
            image_path,
            prompt: entry.prompt,
            category,
            mask,
        });
    }
    if records.is_empty() {
        return Err(BenchError::Manifest {
            line: 0,
            message: "manifest lists no records".into(),
        });
    }
    let absolute = records.iter().filter(|r| r.category == PositionType::Absolute).count();
    tracing::info!(
        total = records.len(),
        absolute,
        relative = records.len() - absolute,
        "dataset loaded"
    );
    Ok(records)
}
