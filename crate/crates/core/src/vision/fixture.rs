use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Deserialize;

use super::{BoundingBox, DetectionBackend, Heatmap, ImageRef, SegmentationBackend, VisionError};

/// File-name form of a query: lowercase, every non-alphanumeric character
/// replaced by `_`.
pub fn query_slug(query: &str) -> String {
    query
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

fn key(image: &str, query: &str) -> (String, String) {
    (image.to_string(), query_slug(query))
}

#[derive(Deserialize)]
struct FixtureBox {
    x: f64,
    y: f64,
    width: f64,
    height: f64,
    #[serde(default = "one")]
    confidence: f64,
}

fn one() -> f64 {
    1.0
}

/// Canned segmentation and detection results keyed by image id and query.
///
/// On disk, one sidecar directory per image id:
///
/// ```text
/// <root>/<image id>/heatmaps/<query slug>.png   16-bit (or 8-bit) grayscale
/// <root>/<image id>/boxes.json                  {"<query>": [{x, y, width, height, confidence}]}
/// ```
///
/// Queries are matched by [`query_slug`], so case and punctuation are
/// ignored. The store is immutable once built; call counters allow tests to
/// assert which backend a code path touched.
#[derive(Debug, Default)]
pub struct FixtureVision {
    heatmaps: HashMap<(String, String), Heatmap>,
    boxes: HashMap<(String, String), Vec<BoundingBox>>,
    segment_calls: AtomicUsize,
    detect_calls: AtomicUsize,
}

impl FixtureVision {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_heatmap(mut self, image: &str, query: &str, map: Heatmap) -> Self {
        self.heatmaps.insert(key(image, query), map);
        self
    }

    /// Adds a detection; the box label is replaced by `query`.
    pub fn with_box(mut self, image: &str, query: &str, mut b: BoundingBox) -> Self {
        b.label = query.to_string();
        self.boxes.entry(key(image, query)).or_default().push(b);
        self
    }

    pub fn open(root: &Path) -> Result<Self, VisionError> {
        let io = |e: std::io::Error, p: &Path| VisionError::Image(format!("{}: {e}", p.display()));
        let mut store = Self::new();
        for entry in std::fs::read_dir(root).map_err(|e| io(e, root))? {
            let entry = entry.map_err(|e| io(e, root))?;
            let dir = entry.path();
            if !dir.is_dir() {
                continue;
            }
            let image_id = entry.file_name().to_string_lossy().into_owned();

            let heat_dir = dir.join("heatmaps");
            if heat_dir.is_dir() {
                for file in std::fs::read_dir(&heat_dir).map_err(|e| io(e, &heat_dir))? {
                    let path = file.map_err(|e| io(e, &heat_dir))?.path();
                    if path.extension().and_then(|e| e.to_str()) != Some("png") {
                        continue;
                    }
                    let slug = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    let bytes = std::fs::read(&path).map_err(|e| io(e, &path))?;
                    let map = Heatmap::from_png_bytes(&bytes)
                        .map_err(|e| VisionError::InvalidHeatmap(format!("{}: {e}", path.display())))?;
                    store.heatmaps.insert((image_id.clone(), slug), map);
                }
            }

            let box_file = dir.join("boxes.json");
            if box_file.is_file() {
                let text = std::fs::read_to_string(&box_file).map_err(|e| io(e, &box_file))?;
                let parsed: HashMap<String, Vec<FixtureBox>> = serde_json::from_str(&text)
                    .map_err(|e| VisionError::MalformedResponse(format!("{}: {e}", box_file.display())))?;
                for (query, list) in parsed {
                    for b in list {
                        let bb = BoundingBox::new(query.clone(), b.x, b.y, b.width, b.height, b.confidence);
                        store.boxes.entry(key(&image_id, &query)).or_default().push(bb);
                    }
                }
            }
        }
        Ok(store)
    }

    pub fn segment_calls(&self) -> usize {
        self.segment_calls.load(Ordering::Relaxed)
    }

    pub fn detect_calls(&self) -> usize {
        self.detect_calls.load(Ordering::Relaxed)
    }
}

impl SegmentationBackend for FixtureVision {
    fn segment_raw(&self, image: &ImageRef, query: &str) -> Result<Heatmap, VisionError> {
        self.segment_calls.fetch_add(1, Ordering::Relaxed);
        self.heatmaps
            .get(&key(image.id(), query))
            .cloned()
            .ok_or_else(|| VisionError::MissingFixture {
                image: image.id().to_string(),
                query: query.to_string(),
            })
    }
}

impl DetectionBackend for FixtureVision {
    fn detect_raw(&self, image: &ImageRef, queries: &[String]) -> Result<Vec<BoundingBox>, VisionError> {
        self.detect_calls.fetch_add(1, Ordering::Relaxed);
        let mut out = Vec::new();
        for query in queries {
            if let Some(list) = self.boxes.get(&key(image.id(), query)) {
                out.extend(list.iter().cloned().map(|mut b| {
                    b.label = query.clone();
                    b
                }));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::VisionGateway;
    use std::sync::Arc;

    fn gateway(store: FixtureVision) -> (VisionGateway, Arc<FixtureVision>) {
        let store = Arc::new(store);
        (VisionGateway::new(store.clone(), store.clone()), store)
    }

    #[test]
    fn sidecar_heatmap_is_returned() {
        let mut map = Heatmap::zeros(8, 8);
        map.set(5, 3, 1.0);
        let (gw, _) = gateway(FixtureVision::new().with_heatmap("A", "book", map.clone()));
        let img = ImageRef::blank("A", 8, 8).unwrap();
        assert_eq!(gw.segment(&img, "Book").unwrap(), map);
    }

    #[test]
    fn zero_heatmap_is_degenerate() {
        let (gw, _) = gateway(FixtureVision::new().with_heatmap("A", "wall", Heatmap::zeros(4, 4)));
        let img = ImageRef::blank("A", 4, 4).unwrap();
        assert_eq!(
            gw.segment(&img, "wall"),
            Err(VisionError::DegenerateHeatmap { query: "wall".into() })
        );
    }

    #[test]
    fn cup_box_and_unknown_query() {
        let (gw, store) = gateway(
            FixtureVision::new().with_box("B", "cup", BoundingBox::new("", 100.0, 150.0, 120.0, 90.0, 0.8)),
        );
        let img = ImageRef::blank("B", 1280, 720).unwrap();
        let boxes = gw.detect(&img, &["cup".into()]).unwrap();
        assert_eq!(boxes, vec![BoundingBox::new("cup", 100.0, 150.0, 120.0, 90.0, 0.8)]);
        assert!(gw.detect(&img, &["giraffe".into()]).unwrap().is_empty());
        assert_eq!(store.detect_calls(), 2);
        assert_eq!(store.segment_calls(), 0);
    }

    #[test]
    fn groups_follow_query_order_best_first() {
        let store = FixtureVision::new()
            .with_box("B", "bowl", BoundingBox::new("", 0.0, 0.0, 10.0, 10.0, 0.3))
            .with_box("B", "bowl", BoundingBox::new("", 20.0, 0.0, 10.0, 10.0, 0.9))
            .with_box("B", "cup", BoundingBox::new("", 40.0, 0.0, 10.0, 10.0, 0.5));
        let (gw, _) = gateway(store);
        let img = ImageRef::blank("B", 100, 100).unwrap();
        let boxes = gw.detect(&img, &["cup".into(), "bowl".into()]).unwrap();
        let summary: Vec<_> = boxes.iter().map(|b| (b.label.as_str(), b.confidence)).collect();
        assert_eq!(summary, vec![("cup", 0.5), ("bowl", 0.9), ("bowl", 0.3)]);
        assert_eq!(gw.detect(&img, &[]), Err(VisionError::EmptyQueries));
    }

    #[test]
    fn identical_requests_identical_results() {
        let mut map = Heatmap::zeros(4, 4);
        map.set(1, 1, 0.7);
        let (gw, _) = gateway(FixtureVision::new().with_heatmap("A", "book", map));
        let img = ImageRef::blank("A", 16, 16).unwrap();
        assert_eq!(gw.segment(&img, "book").unwrap(), gw.segment(&img, "book").unwrap());
    }

    #[test]
    fn loads_sidecar_directory() {
        let dir = tempfile::tempdir().unwrap();
        let img_dir = dir.path().join("kitchen");
        std::fs::create_dir_all(img_dir.join("heatmaps")).unwrap();
        let mut map = Heatmap::zeros(4, 2);
        map.set(2, 1, 1.0);
        std::fs::write(img_dir.join("heatmaps").join(format!("{}.png", query_slug("the red book"))), map.to_png16_bytes()).unwrap();
        std::fs::write(
            img_dir.join("boxes.json"),
            r#"{"cup": [{"x": 1, "y": 0, "width": 2, "height": 1, "confidence": 0.4}]}"#,
        )
        .unwrap();
        let (gw, _) = gateway(FixtureVision::open(dir.path()).unwrap());
        let img = ImageRef::blank("kitchen", 4, 2).unwrap();
        assert_eq!(gw.segment(&img, "The red book").unwrap(), map);
        assert_eq!(gw.detect(&img, &["cup".into()]).unwrap().len(), 1);
    }
}
