use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::LlmError;

/// Identifier of a registered structured-output schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaId(String);

impl SchemaId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SchemaId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Ids of the schemas every pipeline stage relies on.
pub mod ids {
    pub const INTENT: &str = "intent";
    pub const ANALYSIS: &str = "prompt_analysis";
    pub const COORDINATES: &str = "coordinate_expressions";
    pub const OBJECTS: &str = "object_list";
    pub const END_EFFECTOR: &str = "end_effector";
}

struct Entry {
    document: Value,
    validator: jsonschema::Validator,
}

/// Immutable-after-setup collection of JSON schemas keyed by [`SchemaId`].
#[derive(Default)]
pub struct SchemaRegistry {
    entries: HashMap<SchemaId, Entry>,
}

impl fmt::Debug for SchemaRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ids: Vec<_> = self.entries.keys().map(SchemaId::as_str).collect();
        ids.sort_unstable();
        f.debug_struct("SchemaRegistry").field("schemas", &ids).finish()
    }
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry pre-populated with the schemas used by the pipeline stages.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        for (id, doc) in builtin_schemas() {
            reg.register(id, doc).expect("builtin schemas compile");
        }
        reg
    }

    pub fn register(&mut self, id: impl Into<SchemaId>, document: Value) -> Result<(), LlmError> {
        let id = id.into();
        let validator = jsonschema::validator_for(&document).map_err(|e| {
            LlmError::InvalidRequest(format!("schema {id} does not compile: {e}"))
        })?;
        self.entries.insert(id, Entry { document, validator });
        Ok(())
    }

    pub fn contains(&self, id: &SchemaId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn document(&self, id: &SchemaId) -> Option<&Value> {
        self.entries.get(id).map(|e| &e.document)
    }

    /// Validates `instance`; on failure returns the joined error messages.
    pub fn validate(&self, id: &SchemaId, instance: &Value) -> Result<(), String> {
        let entry = self
            .entries
            .get(id)
            .ok_or_else(|| format!("schema {id} not registered"))?;
        let errors: Vec<String> = entry
            .validator
            .iter_errors(instance)
            .map(|e| e.to_string())
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors.join("; "))
        }
    }
}

fn builtin_schemas() -> Vec<(&'static str, Value)> {
    vec![
        (
            ids::INTENT,
            json!({
                "type": "object",
                "properties": {
                    "category": { "enum": ["Prediction", "Correction", "Confirmation"] }
                },
                "required": ["category"]
            }),
        ),
        (
            ids::ANALYSIS,
            json!({
                "type": "object",
                "properties": {
                    "chain_of_thought": { "type": "string" },
                    "objects": { "type": "array", "items": { "type": "string" } },
                    "position_type": { "enum": ["Absolute", "Relative"] }
                },
                "required": ["chain_of_thought", "objects", "position_type"]
            }),
        ),
        (
            ids::COORDINATES,
            json!({
                "type": "object",
                "properties": {
                    "chain_of_thought": { "type": "string" },
                    "x": { "type": "string", "pattern": "^[0-9.+\\-*/() \\t]+$" },
                    "y": { "type": "string", "pattern": "^[0-9.+\\-*/() \\t]+$" }
                },
                "required": ["x", "y"]
            }),
        ),
        (
            ids::OBJECTS,
            json!({
                "type": "object",
                "properties": {
                    "objects": { "type": "array", "items": { "type": "string" } }
                },
                "required": ["objects"]
            }),
        ),
        (
            ids::END_EFFECTOR,
            json!({
                "type": "object",
                "properties": {
                    "end_effector": { "enum": ["LeftHand", "RightHand", "LeftFoot", "RightFoot"] },
                    "task_type": { "enum": ["SupportContact", "Reach"] }
                },
                "required": ["end_effector", "task_type"]
            }),
        ),
    ]
}
