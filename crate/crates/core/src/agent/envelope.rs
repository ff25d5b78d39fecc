//! One agent turn as a stand-alone document, and the strict reader for it.

use std::fmt;
use std::ops::Range;

use crate::format::Format;
use crate::value::{Object, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Step {
        thought: String,
        action: String,
        arguments: Value,
    },
    Final {
        answer: String,
    },
}

impl Envelope {
    pub fn to_value(&self) -> Value {
        match self {
            Envelope::Step {
                thought,
                action,
                arguments,
            } => Value::object([
                ("thought", Value::text(thought.as_str())),
                ("action", Value::text(action.as_str())),
                ("arguments", arguments.clone()),
            ]),
            Envelope::Final { answer } => Value::object([("final_answer", Value::text(answer.as_str()))]),
        }
    }

    /// Maps a decoded document onto an envelope; any other key set fails.
    pub fn from_value(v: &Value) -> Result<Envelope, String> {
        let Value::Object(obj) = v else {
            return Err("response is not an object".into());
        };
        let mut keys: Vec<&str> = obj.keys().collect();
        keys.sort_unstable();
        match keys.as_slice() {
            ["action", "arguments", "thought"] => {
                let thought = text_field(obj, "thought")?;
                let action = text_field(obj, "action")?;
                if action.is_empty() {
                    return Err("action is empty".into());
                }
                let arguments = obj.get("arguments").expect("key present").clone();
                if arguments.as_object().is_none() {
                    return Err("arguments is not an object".into());
                }
                Ok(Envelope::Step {
                    thought,
                    action,
                    arguments,
                })
            }
            ["final_answer"] => Ok(Envelope::Final {
                answer: text_field(obj, "final_answer")?,
            }),
            other => Err(format!("unexpected key set {other:?}")),
        }
    }

    pub fn render(&self, format: Format) -> String {
        format.encode(&self.to_value())
    }
}

fn text_field(obj: &Object, key: &str) -> Result<String, String> {
    obj.get(key)
        .and_then(Value::as_text)
        .map(str::to_owned)
        .ok_or_else(|| format!("{key} is not a string"))
}

/// The preprocessing or parsing step at which a turn was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Think,
    Fence,
    Decode,
    Shape,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Think => "think",
            Stage::Fence => "fence",
            Stage::Decode => "decode",
            Stage::Shape => "shape",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse failure ({stage}): {detail}")]
pub struct ParseFailure {
    pub stage: Stage,
    pub detail: String,
}

impl ParseFailure {
    fn new(stage: Stage, detail: impl Into<String>) -> Self {
        ParseFailure {
            stage,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEnvelope {
    pub envelope: Envelope,
    pub think_stripped: bool,
    pub fence_extracted: bool,
    /// Byte range of the decoded document inside the raw text.
    pub document: Range<usize>,
}

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const FENCE: &str = "```";

/// Drops a leading think block, then narrows to the first fenced block if
/// one is present.
pub fn preprocess(raw: &str) -> Result<(Range<usize>, bool, bool), ParseFailure> {
    let mut start = raw.len() - raw.trim_start().len();
    let mut end = raw.len();
    let mut think = false;
    if raw[start..].starts_with(THINK_OPEN) {
        let body = start + THINK_OPEN.len();
        let close = raw[body..]
            .find(THINK_CLOSE)
            .ok_or_else(|| ParseFailure::new(Stage::Think, "think block is never closed"))?;
        start = body + close + THINK_CLOSE.len();
        think = true;
    }
    let mut fence = false;
    if let Some(open) = raw[start..end].find(FENCE) {
        let open = start + open;
        let newline = raw[open..]
            .find('\n')
            .ok_or_else(|| ParseFailure::new(Stage::Fence, "fence opener is not followed by a newline"))?;
        let body = open + newline + 1;
        let close = closing_fence(&raw[body..])
            .ok_or_else(|| ParseFailure::new(Stage::Fence, "fenced block is never closed"))?;
        start = body;
        end = body + close;
        fence = true;
    }
    // leading blank lines and trailing whitespace are not part of the document
    while let Some(nl) = raw[start..end].find('\n') {
        if raw[start..start + nl].trim().is_empty() {
            start += nl + 1;
        } else {
            break;
        }
    }
    end = start + raw[start..end].trim_end().len();
    Ok((start..end, think, fence))
}

/// Offset of the first line of `s` that starts with a fence.
fn closing_fence(s: &str) -> Option<usize> {
    let mut offset = 0;
    for line in s.split_inclusive('\n') {
        if line.starts_with(FENCE) {
            return Some(offset);
        }
        offset += line.len();
    }
    None
}

pub fn parse_envelope(raw: &str, expected: Format) -> Result<ParsedEnvelope, ParseFailure> {
    let (document, think_stripped, fence_extracted) = preprocess(raw)?;
    let value = expected
        .decode(&raw[document.clone()])
        .map_err(|e| ParseFailure::new(Stage::Decode, e.to_string()))?;
    let envelope = Envelope::from_value(&value).map_err(|e| ParseFailure::new(Stage::Shape, e))?;
    Ok(ParsedEnvelope {
        envelope,
        think_stripped,
        fence_extracted,
        document,
    })
}
