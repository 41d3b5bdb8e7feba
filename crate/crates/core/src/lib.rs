pub mod bench;
pub mod contact;
pub mod correction;
pub mod error;
pub mod expr;
mod http;
pub mod intent;
pub mod llm;
pub mod par;
pub mod prediction;
pub mod prompts;
pub mod session;
pub mod vision;

pub use error::PipelineError;
pub use intent::{IntentClass, IntentRouter, Utterance};
pub use prediction::{PixelPoint, PositionType, Predictor};
