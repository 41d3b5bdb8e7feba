use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Pipeline, Step};
use crate::correction::HistoryTurn;
use crate::intent::{IntentClass, Utterance};
use crate::prediction::PixelPoint;
use crate::vision::ImageRef;

pub const TARGET_RADIUS: u32 = 18;
pub const MARKER_RADIUS: u32 = 5;
pub const PROMPT_BUDGET: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PracticeError {
    #[error("prompt budget of {PROMPT_BUDGET} exhausted")]
    BudgetExhausted,
    #[error("trial already stopped")]
    Stopped,
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("target ({u}, {v}) outside the image")]
    TargetOutside { u: u32, v: u32 },
}

/// Reply to one practice prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticeReply {
    /// Center-to-center distance after this prompt; `None` while no marker
    /// has been placed.
    pub distance_px: Option<f64>,
    pub remaining_budget: usize,
    pub intent: Option<IntentClass>,
    pub marker: Option<PixelPoint>,
    pub finished: bool,
    pub message: String,
}

/// A placement exercise: steer the marker onto a drawn target circle with at
/// most [`PROMPT_BUDGET`] prompts.
#[derive(Debug, Clone, Serialize)]
pub struct PracticeTrial {
    #[serde(skip)]
    image: ImageRef,
    pub target_center: PixelPoint,
    pub target_radius: u32,
    pub marker_radius: u32,
    pub prompt_budget: usize,
    pub marker: Option<PixelPoint>,
    pub distances: Vec<Option<f64>>,
    pub stopped: bool,
    #[serde(skip)]
    history: Vec<HistoryTurn>,
}

/// A target center at least [`TARGET_RADIUS`] from every edge when the image
/// allows it.
pub fn random_target<R: Rng + ?Sized>(rng: &mut R, width: u32, height: u32) -> PixelPoint {
    let pick = |rng: &mut R, n: u32| {
        if n > 2 * TARGET_RADIUS {
            rng.random_range(TARGET_RADIUS..n - TARGET_RADIUS)
        } else {
            rng.random_range(0..n)
        }
    };
    let u = pick(rng, width);
    PixelPoint::new(u, pick(rng, height))
}

impl PracticeTrial {
    pub fn new(image: ImageRef, target_center: PixelPoint) -> Result<Self, PracticeError> {
        if !target_center.within(image.width(), image.height()) {
            return Err(PracticeError::TargetOutside {
                u: target_center.u,
                v: target_center.v,
            });
        }
        Ok(Self {
            image,
            target_center,
            target_radius: TARGET_RADIUS,
            marker_radius: MARKER_RADIUS,
            prompt_budget: PROMPT_BUDGET,
            marker: None,
            distances: Vec::new(),
            stopped: false,
            history: Vec::new(),
        })
    }

    pub fn image(&self) -> &ImageRef {
        &self.image
    }

    pub fn remaining_budget(&self) -> usize {
        self.prompt_budget - self.distances.len()
    }

    pub fn finished(&self) -> bool {
        self.stopped || self.remaining_budget() == 0
    }

    /// Whether the marker center lies inside the target circle.
    pub fn on_target(&self) -> bool {
        self.marker
            .is_some_and(|m| m.distance(self.target_center) <= self.target_radius as f64)
    }

    /// Consumes one prompt and records the marker's distance afterwards.
    pub fn record(&mut self, marker: Option<PixelPoint>) -> Result<Option<f64>, PracticeError> {
        if self.stopped {
            return Err(PracticeError::Stopped);
        }
        if self.remaining_budget() == 0 {
            return Err(PracticeError::BudgetExhausted);
        }
        self.marker = marker;
        let d = marker.map(|m| m.distance(self.target_center));
        self.distances.push(d);
        Ok(d)
    }

    /// Runs one operator prompt through the pipeline. A Confirmation ends
    /// the trial; failed stages leave the marker where it was.
    pub fn prompt(&mut self, pipeline: &Pipeline, text: &str) -> Result<PracticeReply, PracticeError> {
        if self.stopped {
            return Err(PracticeError::Stopped);
        }
        if self.remaining_budget() == 0 {
            return Err(PracticeError::BudgetExhausted);
        }
        let utterance = Utterance::new(text).map_err(|_| PracticeError::EmptyUtterance)?;
        let (intent, step) = pipeline.step(&self.image, self.marker, &self.history, &utterance);
        let stop = matches!(step, Ok(Step::Confirmed));
        let (marker, message) = match step {
            Ok(Step::Predicted(out)) => (Some(out.point), "marker placed".to_string()),
            Ok(Step::Corrected(out)) => (Some(out.point), "marker moved".to_string()),
            Ok(Step::Confirmed) => (self.marker, "trial stopped by operator".to_string()),
            Ok(Step::RejectedNoTarget(class)) => (self.marker, format!("{class} needs a marker first")),
            Err(e) => (self.marker, e.to_string()),
        };
        if marker != self.marker {
            if let Some(point) = marker {
                self.history.push(HistoryTurn {
                    utterance: text.to_string(),
                    point,
                });
            }
        }
        let distance_px = self.record(marker)?;
        self.stopped |= stop;
        Ok(PracticeReply {
            distance_px,
            remaining_budget: self.remaining_budget(),
            intent,
            marker,
            finished: self.finished(),
            message,
        })
    }
}
