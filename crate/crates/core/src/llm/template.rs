use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of worked examples appended to every system prompt.
pub const SHOT_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template} needs exactly {SHOT_COUNT} examples, got {got}")]
    ShotCount { template: String, got: usize },
    #[error("template {template} is missing a binding for {{{placeholder}}}")]
    MissingBinding { template: String, placeholder: String },
    #[error("template {template} has no placeholder {{{binding}}}")]
    UnusedBinding { template: String, binding: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub input: String,
    pub output: String,
}

impl Shot {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
        }
    }
}

/// A system prompt body with `{name}` placeholders plus five fixed examples.
///
/// A placeholder is `{` followed by an identifier (`[A-Za-z_][A-Za-z0-9_]*`)
/// and `}`. Any other brace is literal, so JSON snippets can appear in the
/// body unescaped; `{{` and `}}` always produce a single literal brace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate", into = "RawTemplate")]
pub struct PromptTemplate {
    name: String,
    body: String,
    shots: [Shot; SHOT_COUNT],
}

#[derive(Serialize, Deserialize)]
struct RawTemplate {
    name: String,
    body: String,
    shots: Vec<Shot>,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = TemplateError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        PromptTemplate::new(raw.name, raw.body, raw.shots)
    }
}

impl From<PromptTemplate> for RawTemplate {
    fn from(t: PromptTemplate) -> Self {
        RawTemplate {
            name: t.name,
            body: t.body,
            shots: t.shots.into(),
        }
    }
}

enum Segment<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn segments(body: &str) -> Vec<Segment<'_>> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Segment::Text(&body[literal_start..=i]));
                i += 2;
                literal_start = i;
            }
            b'{' if bytes.get(i + 1).copied().is_some_and(is_ident_start) => {
                let mut end = i + 1;
                while end < bytes.len() && is_ident(bytes[end]) {
                    end += 1;
                }
                if bytes.get(end) == Some(&b'}') {
                    out.push(Segment::Text(&body[literal_start..i]));
                    out.push(Segment::Placeholder(&body[i + 1..end]));
                    i = end + 1;
                    literal_start = i;
                } else {
                    i = end;
                }
            }
            _ => i += 1,
        }
    }
    out.push(Segment::Text(&body[literal_start..]));
    out
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        body: impl Into<String>,
        shots: Vec<Shot>,
    ) -> Result<Self, TemplateError> {
        let name = name.into();
        let got = shots.len();
        let shots: [Shot; SHOT_COUNT] = shots
            .try_into()
            .map_err(|_| TemplateError::ShotCount {
                template: name.clone(),
                got,
            })?;
        Ok(Self {
            name,
            body: body.into(),
            shots,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn shots(&self) -> &[Shot; SHOT_COUNT] {
        &self.shots
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        segments(&self.body)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) => Some(p),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder and appends the examples in order.
    /// The binding keys must equal the placeholder set.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let placeholders = self.placeholders();
        if let Some(missing) = placeholders.iter().find(|p| !bindings.contains_key(**p)) {
            return Err(TemplateError::MissingBinding {
                template: self.name.clone(),
                placeholder: missing.to_string(),
            });
        }
        if let Some(extra) = bindings.keys().find(|k| !placeholders.contains(k.as_str())) {
            return Err(TemplateError::UnusedBinding {
                template: self.name.clone(),
                binding: extra.clone(),
            });
        }

        let mut out = String::with_capacity(self.body.len() + 512);
        for segment in segments(&self.body) {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Placeholder(p) => out.push_str(&bindings[p]),
            }
        }
        out.push_str("\n\nExamples:");
        for shot in &self.shots {
            out.push_str("\n\nUser: ");
            out.push_str(&shot.input);
            out.push_str("\nAssistant: ");
            out.push_str(&shot.output);
        }
        Ok(out)
    }
}

/// Builds a binding map from string pairs.
pub fn bindings<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
