use thiserror::Error;

use crate::contact::ContactError;
use crate::expr::ExprError;
use crate::llm::{LlmError, TemplateError};
use crate::vision::VisionError;

/// Failure of any pipeline stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("prompt analysis named no objects")]
    NoObjects,
    #[error("analysis says {0:?} but this branch needs the other position type")]
    WrongBranch(crate::prediction::PositionType),
    #[error("no detection for {object:?}")]
    NotDetected { object: String },
    #[error("{axis} expression {expression:?}: {source}")]
    Expression {
        axis: char,
        expression: String,
        #[source]
        source: ExprError,
    },
    #[error("{axis} expression {expression:?} is not a number")]
    NonFiniteCoordinate { axis: char, expression: String },
    #[error(transparent)]
    Contact(#[from] ContactError),
}

impl PipelineError {
    /// True when a backend is unreachable rather than a single request
    /// failing on its content.
    pub fn is_unavailable(&self) -> bool {
        match self {
            PipelineError::Llm(e) => e.is_unavailable(),
            PipelineError::Vision(e) => e.is_unavailable(),
            _ => false,
        }
    }
}
