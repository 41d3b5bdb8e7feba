//! The instruct, predict, correct, confirm loop for one operator.
//!
//! [`Pipeline`] bundles the stateless stages. [`Session`] owns a frame
//! snapshot and the dialogue state and routes each utterance through the
//! pipeline. Callers serialize access to a session; the pipeline itself is
//! shareable.

mod practice;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use practice::{random_target, PracticeError, PracticeReply, PracticeTrial, MARKER_RADIUS, PROMPT_BUDGET, TARGET_RADIUS};

use crate::contact::{
    emit_contact_task, Acknowledgement, CameraExtrinsics, ContactError, ContactResolver, ContactTask, EffectorPoses,
    EndEffectorSelector, PointCloud, ResolverSettings, TaskSink,
};
use crate::correction::{CorrectionContext, CorrectionOutcome, Corrector, HistoryTurn};
use crate::error::PipelineError;
use crate::intent::{IntentClass, IntentRouter, Utterance};
use crate::llm::LlmGateway;
use crate::par::Execution;
use crate::prediction::{PixelPoint, PredictionOutcome, Predictor};
use crate::prompts::PromptSet;
use crate::vision::{ImageRef, VisionGateway};

/// Image, depth and camera pose captured together, plus where each limb is.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    image: ImageRef,
    cloud: PointCloud,
    extrinsics: CameraExtrinsics,
    poses: EffectorPoses,
}

impl FrameBundle {
    pub fn new(
        image: ImageRef,
        cloud: PointCloud,
        extrinsics: CameraExtrinsics,
        poses: EffectorPoses,
    ) -> Result<Self, ContactError> {
        if (image.width(), image.height()) != (cloud.width(), cloud.height()) {
            return Err(ContactError::DimensionMismatch {
                image_width: image.width(),
                image_height: image.height(),
                cloud_width: cloud.width(),
                cloud_height: cloud.height(),
            });
        }
        Ok(Self {
            image,
            cloud,
            extrinsics,
            poses,
        })
    }

    pub fn image(&self) -> &ImageRef {
        &self.image
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn extrinsics(&self) -> &CameraExtrinsics {
        &self.extrinsics
    }

    pub fn poses(&self) -> &EffectorPoses {
        &self.poses
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    AwaitingInstruction,
    HasCandidate,
    /// Held only while the contact task is being resolved.
    Confirmed,
    Executing,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    PredictionSet,
    TargetCorrected,
    ContactTaskEmitted,
    RejectedNoTarget,
    Failed,
}

/// The reply to one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub kind: EventKind,
    pub intent: Option<IntentClass>,
    pub target: Option<PixelPoint>,
    pub phase: Phase,
    pub message: String,
    #[serde(default)]
    pub clamped: bool,
}

/// One accepted utterance and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub utterance: String,
    pub intent: Option<IntentClass>,
    pub kind: EventKind,
    pub point: Option<PixelPoint>,
    pub message: String,
}

/// A task handed to the controller and not yet reported finished.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTask {
    pub pixel: PixelPoint,
    pub task: ContactTask,
    pub depth_substituted: bool,
    pub acknowledgement: Acknowledgement,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("a contact task is executing; finish it before sending more instructions")]
    Executing,
    #[error("no contact task is executing")]
    NotExecuting,
}

/// What the stateless stages made of an utterance.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Predicted(PredictionOutcome),
    Corrected(CorrectionOutcome),
    Confirmed,
    RejectedNoTarget(IntentClass),
}

/// All stages, shareable across sessions.
#[derive(Clone)]
pub struct Pipeline {
    router: IntentRouter,
    predictor: Predictor,
    corrector: Corrector,
    resolver: ContactResolver,
    sink: Arc<dyn TaskSink>,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline").finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(
        llm: LlmGateway,
        vision: VisionGateway,
        prompts: &PromptSet,
        settings: ResolverSettings,
        sink: Arc<dyn TaskSink>,
    ) -> Result<Self, PipelineError> {
        Ok(Self {
            router: IntentRouter::new(llm.clone(), &prompts.intent)?,
            predictor: Predictor::new(llm.clone(), vision.clone(), &prompts.analyzer, prompts.relative.clone())?,
            corrector: Corrector::new(llm.clone(), vision, &prompts.correction_objects, prompts.correction.clone())?,
            resolver: ContactResolver::new(EndEffectorSelector::new(llm, &prompts.end_effector)?, settings),
            sink,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.predictor = self.predictor.with_execution(execution);
        self
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn router(&self) -> &IntentRouter {
        &self.router
    }

    pub fn resolver(&self) -> &ContactResolver {
        &self.resolver
    }

    /// Classifies and, for Prediction and Correction, computes the new
    /// target. Confirmation is left to the caller. The intent is `None` only
    /// when classification itself failed.
    pub fn step(
        &self,
        image: &ImageRef,
        target: Option<PixelPoint>,
        history: &[HistoryTurn],
        utterance: &Utterance,
    ) -> (Option<IntentClass>, Result<Step, PipelineError>) {
        let intent = match self.router.classify(utterance) {
            Ok(i) => i,
            Err(e) => return (None, Err(e)),
        };
        let result = match (intent, target) {
            (IntentClass::Prediction, _) => self.predictor.predict(image, utterance).map(Step::Predicted),
            (IntentClass::Correction, Some(current_target)) => {
                let ctx = CorrectionContext {
                    current_target,
                    history,
                    image,
                };
                self.corrector.correct(&ctx, utterance).map(Step::Corrected)
            }
            (IntentClass::Confirmation, Some(_)) => Ok(Step::Confirmed),
            (other, None) => Ok(Step::RejectedNoTarget(other)),
        };
        (Some(intent), result)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    frame: FrameBundle,
    current_target: Option<PixelPoint>,
    history: Vec<Turn>,
    phase: Phase,
    initial_prediction_utterance: Option<String>,
    active_task: Option<ActiveTask>,
    completed_tasks: usize,
}

impl Session {
    pub fn new(id: impl Into<String>, frame: FrameBundle) -> Self {
        Self {
            id: id.into(),
            frame,
            current_target: None,
            history: Vec::new(),
            phase: Phase::AwaitingInstruction,
            initial_prediction_utterance: None,
            active_task: None,
            completed_tasks: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frame(&self) -> &FrameBundle {
        &self.frame
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn current_target(&self) -> Option<PixelPoint> {
        self.current_target
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn initial_prediction_utterance(&self) -> Option<&str> {
        self.initial_prediction_utterance.as_deref()
    }

    pub fn active_task(&self) -> Option<&ActiveTask> {
        self.active_task.as_ref()
    }

    pub fn completed_tasks(&self) -> usize {
        self.completed_tasks
    }

    /// Earlier turns that produced a target, as correction context.
    pub fn point_history(&self) -> Vec<HistoryTurn> {
        self.history
            .iter()
            .filter(|t| matches!(t.kind, EventKind::PredictionSet | EventKind::TargetCorrected))
            .filter_map(|t| {
                t.point.map(|point| HistoryTurn {
                    utterance: t.utterance.clone(),
                    point,
                })
            })
            .collect()
    }

    fn event(&self, kind: EventKind, intent: Option<IntentClass>, message: String, clamped: bool) -> SessionEvent {
        let target = match kind {
            EventKind::ContactTaskEmitted => self.active_task.as_ref().map(|a| a.pixel),
            _ => self.current_target,
        };
        SessionEvent {
            kind,
            intent,
            target,
            phase: self.phase,
            message,
            clamped,
        }
    }

    fn record(&mut self, utterance: &Utterance, event: &SessionEvent) {
        self.history.push(Turn {
            utterance: utterance.text().to_string(),
            intent: event.intent,
            kind: event.kind,
            point: event.target,
            message: event.message.clone(),
        });
    }

    /// Routes one utterance. Every accepted utterance lands in the history
    /// exactly once; a failing stage leaves phase and target untouched.
    pub fn handle_utterance(&mut self, pipeline: &Pipeline, text: &str) -> Result<SessionEvent, SessionError> {
        if self.phase == Phase::Executing {
            return Err(SessionError::Executing);
        }
        let utterance = Utterance::new(text).map_err(|_| SessionError::EmptyUtterance)?;
        let points = self.point_history();
        let (intent, step) = pipeline.step(self.frame.image(), self.current_target, &points, &utterance);
        let event = match step {
            Err(e) => self.event(EventKind::Failed, intent, e.to_string(), false),
            Ok(Step::Predicted(out)) => {
                self.current_target = Some(out.point);
                self.phase = Phase::HasCandidate;
                self.initial_prediction_utterance = Some(utterance.text().to_string());
                let message = format!(
                    "{:?} target on {} at [{},{}]",
                    out.branch,
                    out.analysis.objects.join(", "),
                    out.point.u,
                    out.point.v
                );
                self.event(EventKind::PredictionSet, intent, message, out.clamped)
            }
            Ok(Step::Corrected(out)) => {
                self.current_target = Some(out.point);
                let message = format!("target moved to [{},{}]", out.point.u, out.point.v);
                self.event(EventKind::TargetCorrected, intent, message, out.clamped)
            }
            Ok(Step::RejectedNoTarget(class)) => self.event(
                EventKind::RejectedNoTarget,
                intent,
                format!("{class} needs a target; give an instruction first"),
                false,
            ),
            Ok(Step::Confirmed) => self.confirm(pipeline, intent),
        };
        self.record(&utterance, &event);
        Ok(event)
    }

    fn confirm(&mut self, pipeline: &Pipeline, intent: Option<IntentClass>) -> SessionEvent {
        let (Some(pixel), Some(initial)) = (self.current_target, self.initial_prediction_utterance.clone()) else {
            return self.event(EventKind::RejectedNoTarget, intent, "nothing to confirm".into(), false);
        };
        self.phase = Phase::Confirmed;
        let outcome = Utterance::new(initial).and_then(|initial| {
            let r = pipeline.resolver.resolve(
                self.frame.cloud(),
                self.frame.extrinsics(),
                self.frame.poses(),
                pixel,
                &initial,
            )?;
            let ack = emit_contact_task(&r.task, pipeline.sink.as_ref())?;
            Ok((r, ack))
        });
        match outcome {
            Ok((r, acknowledgement)) => {
                let message = format!(
                    "{} {:?} task sent to {}",
                    r.choice.end_effector, r.choice.task_type, acknowledgement.destination
                );
                self.active_task = Some(ActiveTask {
                    pixel,
                    task: r.task,
                    depth_substituted: r.depth.substituted,
                    acknowledgement,
                });
                self.current_target = None;
                self.phase = Phase::Executing;
                self.event(EventKind::ContactTaskEmitted, intent, message, false)
            }
            Err(e) => {
                self.phase = Phase::HasCandidate;
                self.event(EventKind::Failed, intent, e.to_string(), false)
            }
        }
    }

    /// The controller reported the task done: ready for the next instruction.
    pub fn finish_execution(&mut self) -> Result<(), SessionError> {
        if self.phase != Phase::Executing {
            return Err(SessionError::NotExecuting);
        }
        self.active_task = None;
        self.phase = Phase::AwaitingInstruction;
        self.completed_tasks += 1;
        Ok(())
    }

    /// Checks the state invariants; `Err` names the first one violated.
    pub fn check_invariants(&self) -> Result<(), String> {
        let has_candidate = self.phase == Phase::HasCandidate;
        if has_candidate != self.current_target.is_some() {
            return Err(format!("phase {} with target {:?}", self.phase, self.current_target));
        }
        if self.phase == Phase::Confirmed {
            return Err("Confirmed outside of resolution".into());
        }
        let predicted = self.history.iter().any(|t| t.kind == EventKind::PredictionSet);
        if predicted != self.initial_prediction_utterance.is_some() {
            return Err("initial prediction utterance out of sync with history".into());
        }
        if (self.phase == Phase::Executing) != self.active_task.is_some() {
            return Err("active task out of sync with phase".into());
        }
        let emitted = self.history.iter().filter(|t| t.kind == EventKind::ContactTaskEmitted).count();
        if emitted != self.completed_tasks + self.active_task.is_some() as usize {
            return Err("emitted task count out of sync".into());
        }
        if let Some(p) = self.current_target {
            if !p.within(self.frame.image().width(), self.frame.image().height()) {
                return Err(format!("target {p:?} outside the image"));
            }
        }
        Ok(())
    }

    /// JSON view of the whole state, for clients.
    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            image: ImageInfo {
                id: self.frame.image().id().to_string(),
                width: self.frame.image().width(),
                height: self.frame.image().height(),
            },
            phase: self.phase,
            current_target: self.current_target,
            initial_prediction_utterance: self.initial_prediction_utterance.clone(),
            history: self.history.clone(),
            active_task: self.active_task.as_ref().map(|a| ActiveTaskView {
                pixel: a.pixel,
                depth_substituted: a.depth_substituted,
                destination: a.acknowledgement.destination.clone(),
                task: a.task.to_wire().ok().and_then(|w| serde_json::from_str(&w).ok()),
            }),
            completed_tasks: self.completed_tasks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveTaskView {
    pub pixel: PixelPoint,
    pub depth_substituted: bool,
    pub destination: String,
    /// The wire message.
    pub task: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub image: ImageInfo,
    pub phase: Phase,
    pub current_target: Option<PixelPoint>,
    pub initial_prediction_utterance: Option<String>,
    pub history: Vec<Turn>,
    pub active_task: Option<ActiveTaskView>,
    pub completed_tasks: usize,
}
