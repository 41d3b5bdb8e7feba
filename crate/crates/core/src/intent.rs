//! Routes each operator utterance to Prediction, Correction or Confirmation.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::llm::schema::ids;
use crate::llm::{ChatRequest, LlmGateway, PromptTemplate};

/// Additive bias applied to each category token.
pub const CATEGORY_BIAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntentClass {
    Prediction,
    Correction,
    Confirmation,
}

impl IntentClass {
    pub const ALL: [IntentClass; 3] = [
        IntentClass::Prediction,
        IntentClass::Correction,
        IntentClass::Confirmation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentClass::Prediction => "Prediction",
            IntentClass::Correction => "Correction",
            IntentClass::Confirmation => "Confirmation",
        }
    }
}

impl fmt::Display for IntentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A non-blank operator message and when it arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    text: String,
    received: Instant,
}

impl Utterance {
    pub fn new(text: impl Into<String>) -> Result<Self, PipelineError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PipelineError::EmptyUtterance);
        }
        Ok(Self {
            text,
            received: Instant::now(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn received(&self) -> Instant {
        self.received
    }
}

#[derive(Deserialize)]
struct IntentReply {
    category: IntentClass,
}

/// Few-shot classifier over the LLM gateway. Only the current utterance is
/// sent; history plays no part in routing.
#[derive(Debug, Clone)]
pub struct IntentRouter {
    llm: LlmGateway,
    system_prompt: String,
}

impl IntentRouter {
    pub fn new(llm: LlmGateway, template: &PromptTemplate) -> Result<Self, PipelineError> {
        let system_prompt = template.render(&BTreeMap::new())?;
        Ok(Self { llm, system_prompt })
    }

    pub fn classify(&self, utterance: &Utterance) -> Result<IntentClass, PipelineError> {
        let bias = IntentClass::ALL
            .iter()
            .map(|c| (c.as_str().to_string(), CATEGORY_BIAS))
            .collect();
        let req = ChatRequest::new(&self.system_prompt, utterance.text(), ids::INTENT).with_logit_bias(bias);
        let (reply, _) = self.llm.complete_as::<IntentReply>(&req)?;
        Ok(reply.category)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmError, Matcher, ScriptRule, ScriptedBackend};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[derive(Deserialize)]
    struct Labeled {
        text: String,
        intent: IntentClass,
    }

    fn suite() -> Vec<Labeled> {
        serde_json::from_str(include_str!("../fixtures/intent_suite.json")).unwrap()
    }

    fn router(rules: Vec<ScriptRule>) -> IntentRouter {
        let llm = LlmGateway::with_builtin_schemas(Arc::new(ScriptedBackend::new(rules)));
        IntentRouter::new(llm, &crate::prompts::intent()).unwrap()
    }

    fn reply(class: IntentClass) -> String {
        format!(r#"{{"category": "{class}"}}"#)
    }

    #[test]
    fn labeled_suite_is_exact() {
        let cases = suite();
        assert_eq!(cases.len(), 30);
        let rules = cases
            .iter()
            .map(|c| ScriptRule::new(Matcher::Exact(c.text.clone()), reply(c.intent)))
            .collect();
        let r = router(rules);
        for c in &cases {
            assert_eq!(r.classify(&Utterance::new(&c.text).unwrap()).unwrap(), c.intent, "{}", c.text);
        }
        for class in IntentClass::ALL {
            assert!(cases.iter().filter(|c| c.intent == class).count() >= 8);
        }
    }

    #[test]
    fn quoted_examples() {
        let r = router(vec![
            ScriptRule::new(Matcher::Exact("Place your hand on the book".into()), reply(IntentClass::Prediction)),
            ScriptRule::new(Matcher::Exact("Move the target a bit to the right.".into()), reply(IntentClass::Correction)),
            ScriptRule::new(Matcher::Exact("That's good, go ahead".into()), reply(IntentClass::Confirmation)),
        ]);
        let classify = |t: &str| r.classify(&Utterance::new(t).unwrap()).unwrap();
        assert_eq!(classify("Place your hand on the book"), IntentClass::Prediction);
        assert_eq!(classify("Move the target a bit to the right."), IntentClass::Correction);
        assert_eq!(classify("That's good, go ahead"), IntentClass::Confirmation);
    }

    #[test]
    fn blank_utterance_rejected() {
        assert_eq!(Utterance::new("   \n").unwrap_err(), PipelineError::EmptyUtterance);
    }

    proptest! {
        #[test]
        fn codomain_is_closed(raw in prop_oneof![
            ".*",
            "\\{\"category\": \"[A-Za-z]{0,14}\"\\}",
            Just(r#"{"category": "Prediction"}"#.to_string()),
            Just(r#"{"category": "prediction"}"#.to_string()),
        ]) {
            let r = router(vec![ScriptRule::new(Matcher::Any, raw.clone())]);
            match r.classify(&Utterance::new("anything").unwrap()) {
                Ok(class) => {
                    let quoted = format!("\"{}\"", class);
                    prop_assert!(raw.contains(&quoted));
                }
                Err(PipelineError::Llm(LlmError::Validation { .. })) => {}
                Err(other) => prop_assert!(false, "unexpected {other:?}"),
            }
        }
    }
}
