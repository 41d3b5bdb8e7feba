//! Adjusts the current target from a Correction-class utterance.
//!
//! Objects named in the correction are detected and described as boxes. The
//! language model sees the current target, those boxes and the recent turns,
//! and answers with one coordinate expression per axis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::intent::Utterance;
use crate::llm::schema::ids;
use crate::llm::{ChatRequest, LlmGateway, PromptTemplate};
use crate::prediction::{self, CoordinateReply, PixelPoint};
use crate::vision::{BoundingBox, ImageRef, VisionGateway};

/// Turns of history included in the prompt.
pub const HISTORY_WINDOW: usize = 10;

/// One earlier utterance and the target it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub utterance: String,
    pub point: PixelPoint,
}

#[derive(Debug, Clone)]
pub struct CorrectionContext<'a> {
    pub current_target: PixelPoint,
    /// Oldest first.
    pub history: &'a [HistoryTurn],
    pub image: &'a ImageRef,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionOutcome {
    pub point: PixelPoint,
    pub clamped: bool,
    pub objects: Vec<String>,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Deserialize)]
struct ObjectList {
    objects: Vec<String>,
}

/// The user message sent for a correction.
pub fn render_correction_prompt(
    target: PixelPoint,
    boxes: &[(String, BoundingBox)],
    history: &[HistoryTurn],
    utterance: &str,
) -> String {
    let mut lines = vec![format!("Current target is at [{},{}].", target.u, target.v)];
    lines.extend(boxes.iter().map(|(o, b)| prediction::describe_box(o, b)));
    let recent = &history[history.len().saturating_sub(HISTORY_WINDOW)..];
    if !recent.is_empty() {
        lines.push("Previous turns:".to_string());
        for (i, turn) in recent.iter().enumerate() {
            lines.push(format!(
                "{}. {:?} -> [{},{}]",
                i + 1,
                turn.utterance.trim(),
                turn.point.u,
                turn.point.v
            ));
        }
    }
    lines.push(format!("Correction: {}", utterance.trim()));
    lines.join("\n")
}

#[derive(Debug, Clone)]
pub struct Corrector {
    llm: LlmGateway,
    vision: VisionGateway,
    objects_prompt: String,
    template: PromptTemplate,
    seed: Option<u64>,
}

impl Corrector {
    pub fn new(
        llm: LlmGateway,
        vision: VisionGateway,
        objects: &PromptTemplate,
        template: PromptTemplate,
    ) -> Result<Self, PipelineError> {
        Ok(Self {
            llm,
            vision,
            objects_prompt: objects.render(&BTreeMap::new())?,
            template,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Objects the correction mentions; often none.
    pub fn extract_objects(&self, utterance: &Utterance) -> Result<Vec<String>, PipelineError> {
        let req = ChatRequest::new(&self.objects_prompt, utterance.text(), ids::OBJECTS).with_seed(self.seed);
        let (mut list, _) = self.llm.complete_as::<ObjectList>(&req)?;
        list.objects.retain(|o| !o.trim().is_empty());
        Ok(list.objects)
    }

    pub fn correct(&self, ctx: &CorrectionContext<'_>, utterance: &Utterance) -> Result<CorrectionOutcome, PipelineError> {
        let image = ctx.image;
        let objects = self.extract_objects(utterance)?;
        let located = if objects.is_empty() {
            Vec::new()
        } else {
            prediction::locate_objects(&self.vision, image, &objects)?
        };
        let user = render_correction_prompt(ctx.current_target, &located, ctx.history, utterance.text());
        let system = self.template.render(&prediction::image_size_bindings(image))?;
        let req = ChatRequest::new(system, user, ids::COORDINATES).with_seed(self.seed);
        let (reply, _) = self.llm.complete_as::<CoordinateReply>(&req)?;
        let placement = prediction::place(&reply.x, &reply.y, image.width(), image.height())?;
        Ok(CorrectionOutcome {
            point: placement.point,
            clamped: placement.clamped,
            objects,
            boxes: located.into_iter().map(|(_, b)| b).collect(),
        })
    }
}
