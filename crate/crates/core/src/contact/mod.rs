//! Lifts a confirmed pixel to a 3D contact task for the whole-body
//! controller: limb and task selection, depth lookup, camera-to-robot
//! transform, and a Cartesian trajectory from the limb's current position.

mod cloud;
mod extrinsics;
mod task;
mod trajectory;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cloud::{CameraPoint, PointCloud, BINARY_MAGIC, DEFAULT_FALLBACK_RADIUS};
pub use extrinsics::{CameraExtrinsics, ROTATION_TOLERANCE};
pub use task::{
    emit_contact_task, Acknowledgement, ContactTask, FileSink, MemorySink, TaskSink, TcpSink, ENDPOINT_TOLERANCE,
    WIRE_VERSION,
};
pub use trajectory::{h00, h01, hermite, plan_trajectory, Sample, Trajectory, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE};

use crate::error::PipelineError;
use crate::intent::Utterance;
use crate::llm::schema::ids;
use crate::llm::{ChatRequest, LlmGateway, PromptTemplate};
use crate::prediction::PixelPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContactError {
    #[error("point cloud is {cloud_width}x{cloud_height} but image is {image_width}x{image_height}")]
    DimensionMismatch {
        image_width: u32,
        image_height: u32,
        cloud_width: u32,
        cloud_height: u32,
    },
    #[error("pixel ({u}, {v}) outside {width}x{height}")]
    OutOfBounds { u: u32, v: u32, width: u32, height: u32 },
    #[error("no depth within {radius} px of ({u}, {v})")]
    NoDepth { u: u32, v: u32, radius: u32 },
    #[error("point cloud: {0}")]
    CloudFormat(String),
    #[error("extrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("contact task: {0}")]
    InvalidTask(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("sink: {0}")]
    Sink(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EndEffector {
    LeftHand,
    RightHand,
    LeftFoot,
    RightFoot,
}

impl EndEffector {
    pub const ALL: [EndEffector; 4] = [
        EndEffector::LeftHand,
        EndEffector::RightHand,
        EndEffector::LeftFoot,
        EndEffector::RightFoot,
    ];
}

impl fmt::Display for EndEffector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskType {
    SupportContact,
    Reach,
}

/// Current robot-frame position of each limb, the trajectory start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectorPoses(BTreeMap<EndEffector, [f64; 3]>);

impl Default for EffectorPoses {
    fn default() -> Self {
        Self(BTreeMap::from([
            (EndEffector::LeftHand, [0.3, 0.35, 0.9]),
            (EndEffector::RightHand, [0.3, -0.35, 0.9]),
            (EndEffector::LeftFoot, [0.0, 0.1, 0.0]),
            (EndEffector::RightFoot, [0.0, -0.1, 0.0]),
        ]))
    }
}

impl EffectorPoses {
    pub fn get(&self, effector: EndEffector) -> Vector3<f64> {
        let fallback = EffectorPoses::default();
        let p = self.0.get(&effector).or_else(|| fallback.0.get(&effector)).expect("defaults cover every limb");
        Vector3::from(*p)
    }

    pub fn set(&mut self, effector: EndEffector, position: Vector3<f64>) {
        self.0.insert(effector, position.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectorChoice {
    pub end_effector: EndEffector,
    pub task_type: TaskType,
}

#[derive(Debug, Clone)]
pub struct EndEffectorSelector {
    llm: LlmGateway,
    system_prompt: String,
}

impl EndEffectorSelector {
    pub fn new(llm: LlmGateway, template: &PromptTemplate) -> Result<Self, PipelineError> {
        Ok(Self {
            llm,
            system_prompt: template.render(&BTreeMap::new())?,
        })
    }

    /// Limb and task type from the instruction that started the task.
    pub fn select(&self, initial: &Utterance) -> Result<EffectorChoice, PipelineError> {
        let req = ChatRequest::new(&self.system_prompt, initial.text(), ids::END_EFFECTOR);
        Ok(self.llm.complete_as::<EffectorChoice>(&req)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverSettings {
    pub fallback_radius: u32,
    pub duration: f64,
    pub sample_rate: f64,
}

impl Default for ResolverSettings {
    fn default() -> Self {
        Self {
            fallback_radius: DEFAULT_FALLBACK_RADIUS,
            duration: DEFAULT_DURATION,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub task: ContactTask,
    pub choice: EffectorChoice,
    pub depth: CameraPoint,
}

#[derive(Debug, Clone)]
pub struct ContactResolver {
    selector: EndEffectorSelector,
    settings: ResolverSettings,
}

impl ContactResolver {
    pub fn new(selector: EndEffectorSelector, settings: ResolverSettings) -> Self {
        Self { selector, settings }
    }

    pub fn settings(&self) -> &ResolverSettings {
        &self.settings
    }

    pub fn resolve(
        &self,
        cloud: &PointCloud,
        extrinsics: &CameraExtrinsics,
        poses: &EffectorPoses,
        target: PixelPoint,
        initial: &Utterance,
    ) -> Result<Resolution, PipelineError> {
        let choice = self.selector.select(initial)?;
        let depth = cloud.pixel_to_camera(target, self.settings.fallback_radius)?;
        let point_rob = extrinsics.camera_to_robot(depth.point);
        let trajectory = plan_trajectory(
            poses.get(choice.end_effector),
            point_rob,
            self.settings.duration,
            self.settings.sample_rate,
        )?;
        let task = ContactTask {
            end_effector: choice.end_effector,
            task_type: choice.task_type,
            point_cam: depth.point,
            point_rob,
            trajectory,
        };
        task.check()?;
        Ok(Resolution { task, choice, depth })
    }
}
