//! Turns a Prediction-class utterance into a candidate contact pixel.
//!
//! The prompt analyzer first splits the instruction into object
//! descriptions and a position type. Absolute contacts take the argmax of
//! the segmentation heatmap of the first object. Relative contacts detect
//! every object, describe the boxes numerically to the language model and
//! evaluate the two coordinate expressions it returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::expr;
use crate::intent::Utterance;
use crate::llm::schema::ids;
use crate::llm::template::bindings;
use crate::llm::{ChatRequest, LlmGateway, PromptTemplate};
use crate::par::{self, Execution};
use crate::vision::{BoundingBox, Heatmap, ImageRef, VisionGateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionType {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub chain_of_thought: String,
    pub objects: Vec<String>,
    pub position_type: PositionType,
}

/// Image coordinates: `u` is the column (x from the left), `v` the row (y
/// from the top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: u32,
    pub v: u32,
}

impl PixelPoint {
    pub fn new(u: u32, v: u32) -> Self {
        Self { u, v }
    }

    pub fn distance(self, other: PixelPoint) -> f64 {
        let du = self.u as f64 - other.u as f64;
        let dv = self.v as f64 - other.v as f64;
        du.hypot(dv)
    }

    pub fn within(self, width: u32, height: u32) -> bool {
        self.u < width && self.v < height
    }
}

/// A point derived from coordinate expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub point: PixelPoint,
    /// Set when either coordinate fell outside the image and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionOutcome {
    pub point: PixelPoint,
    pub clamped: bool,
    pub branch: PositionType,
    pub analysis: AnalysisResult,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Deserialize)]
pub(crate) struct CoordinateReply {
    pub x: String,
    pub y: String,
}

/// Argmax of the heatmap with ties going to the smallest row-major index.
pub fn heatmap_argmax(map: &Heatmap, mode: Execution) -> PixelPoint {
    let (index, _) = par::argmax_first(mode, map.values()).expect("heatmaps are non-empty");
    let width = map.width() as usize;
    PixelPoint::new((index % width) as u32, (index / width) as u32)
}

fn axis_coordinate(axis: char, expression: &str, limit: u32) -> Result<(u32, bool), PipelineError> {
    let value = expr::eval_str(expression).map_err(|source| PipelineError::Expression {
        axis,
        expression: expression.to_string(),
        source,
    })?;
    if value.is_nan() {
        return Err(PipelineError::NonFiniteCoordinate {
            axis,
            expression: expression.to_string(),
        });
    }
    let rounded = value.round();
    let max = (limit - 1) as f64;
    let clamped = rounded.clamp(0.0, max);
    Ok((clamped as u32, clamped != rounded))
}

/// Evaluates both expressions, rounds to the nearest pixel and clamps into
/// the image.
pub fn place(x_expr: &str, y_expr: &str, width: u32, height: u32) -> Result<Placement, PipelineError> {
    let (u, cu) = axis_coordinate('x', x_expr, width)?;
    let (v, cv) = axis_coordinate('y', y_expr, height)?;
    Ok(Placement {
        point: PixelPoint::new(u, v),
        clamped: cu || cv,
    })
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// `"Cup is at [100,150] with width=120 and height=90."`
pub fn describe_box(object: &str, b: &BoundingBox) -> String {
    format!(
        "{} is at [{:.0},{:.0}] with width={:.0} and height={:.0}.",
        capitalize(object.trim()),
        b.x,
        b.y,
        b.width,
        b.height
    )
}

/// Detects every object and keeps the best box of each, in object order.
pub(crate) fn locate_objects(
    vision: &VisionGateway,
    image: &ImageRef,
    objects: &[String],
) -> Result<Vec<(String, BoundingBox)>, PipelineError> {
    let found = vision.detect(image, objects)?;
    objects
        .iter()
        .map(|object| {
            found
                .iter()
                .find(|b| &b.label == object)
                .map(|b| (object.clone(), b.clone()))
                .ok_or_else(|| PipelineError::NotDetected { object: object.clone() })
        })
        .collect()
}

pub(crate) fn image_size_bindings(image: &ImageRef) -> BTreeMap<String, String> {
    bindings([("width", image.width().to_string()), ("height", image.height().to_string())])
}

#[derive(Debug, Clone)]
pub struct Predictor {
    llm: LlmGateway,
    vision: VisionGateway,
    analyzer_prompt: String,
    relative: PromptTemplate,
    execution: Execution,
    seed: Option<u64>,
}

impl Predictor {
    pub fn new(
        llm: LlmGateway,
        vision: VisionGateway,
        analyzer: &PromptTemplate,
        relative: PromptTemplate,
    ) -> Result<Self, PipelineError> {
        Ok(Self {
            llm,
            vision,
            analyzer_prompt: analyzer.render(&BTreeMap::new())?,
            relative,
            execution: Execution::default(),
            seed: None,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Sampling seed forwarded to backends that accept one.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn analyze_prompt(&self, utterance: &Utterance) -> Result<AnalysisResult, PipelineError> {
        let req = ChatRequest::new(&self.analyzer_prompt, utterance.text(), ids::ANALYSIS).with_seed(self.seed);
        let (mut analysis, _) = self.llm.complete_as::<AnalysisResult>(&req)?;
        analysis.objects.retain(|o| !o.trim().is_empty());
        if analysis.objects.is_empty() {
            return Err(PipelineError::NoObjects);
        }
        tracing::debug!(?analysis.position_type, objects = ?analysis.objects, cot = %analysis.chain_of_thought, "prompt analyzed");
        Ok(analysis)
    }

    pub fn predict_absolute(&self, image: &ImageRef, object: &str) -> Result<PixelPoint, PipelineError> {
        let map = self.vision.segment(image, object)?;
        Ok(heatmap_argmax(&map, self.execution))
    }

    pub fn predict_relative(
        &self,
        image: &ImageRef,
        analysis: &AnalysisResult,
        utterance: &Utterance,
    ) -> Result<(Placement, Vec<BoundingBox>), PipelineError> {
        if analysis.position_type != PositionType::Relative {
            return Err(PipelineError::WrongBranch(analysis.position_type));
        }
        if analysis.objects.is_empty() {
            return Err(PipelineError::NoObjects);
        }
        let located = locate_objects(&self.vision, image, &analysis.objects)?;
        let mut prompt: Vec<String> = located.iter().map(|(o, b)| describe_box(o, b)).collect();
        prompt.push(utterance.text().trim().to_string());

        let system = self.relative.render(&image_size_bindings(image))?;
        let req = ChatRequest::new(system, prompt.join(" "), ids::COORDINATES).with_seed(self.seed);
        let (reply, _) = self.llm.complete_as::<CoordinateReply>(&req)?;
        let placement = place(&reply.x, &reply.y, image.width(), image.height())?;
        Ok((placement, located.into_iter().map(|(_, b)| b).collect()))
    }

    pub fn predict(&self, image: &ImageRef, utterance: &Utterance) -> Result<PredictionOutcome, PipelineError> {
        let analysis = self.analyze_prompt(utterance)?;
        match analysis.position_type {
            PositionType::Absolute => {
                let point = self.predict_absolute(image, &analysis.objects[0])?;
                Ok(PredictionOutcome {
                    point,
                    clamped: false,
                    branch: PositionType::Absolute,
                    analysis,
                    boxes: Vec::new(),
                })
            }
            PositionType::Relative => {
                let (placement, boxes) = self.predict_relative(image, &analysis, utterance)?;
                Ok(PredictionOutcome {
                    point: placement.point,
                    clamped: placement.clamped,
                    branch: PositionType::Relative,
                    analysis,
                    boxes,
                })
            }
        }
    }
}
