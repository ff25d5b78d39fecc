//! Deterministic stand-ins for a model: replayed scripts and the mutators
//! used to inject malformed turns.

use thiserror::Error;

use super::envelope::Envelope;
use crate::format::Format;
use crate::json::decode_json;
use crate::value::Value;

/// What the loop hands the model each iteration.
#[derive(Debug, Clone)]
pub struct AgentRequest<'a> {
    pub iteration: usize,
    pub output_format: Format,
    /// Set when the previous turn was rejected and the model should try again.
    pub retry: bool,
    pub observation: Option<&'a str>,
}

pub trait AgentModel {
    fn respond(&mut self, req: &AgentRequest<'_>) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptBody {
    /// Rendered in whatever output format the loop expects.
    Envelope(Envelope),
    /// Emitted verbatim.
    Raw(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptTurn {
    pub think: Option<String>,
    pub fenced: bool,
    pub body: ScriptBody,
}

impl ScriptTurn {
    pub fn envelope(e: Envelope) -> Self {
        ScriptTurn {
            think: None,
            fenced: false,
            body: ScriptBody::Envelope(e),
        }
    }

    pub fn render(&self, format: Format) -> String {
        let doc = match &self.body {
            ScriptBody::Envelope(e) => e.render(format),
            ScriptBody::Raw(text) => text.clone(),
        };
        let doc = if self.fenced {
            format!("```{}\n{doc}\n```", format.name())
        } else {
            doc
        };
        match &self.think {
            Some(t) => format!("<think>{t}</think>\n{doc}"),
            None => doc,
        }
    }
}

/// Replays a fixed list of turns. A rejected turn is replayed unchanged on
/// retry; past the end of the script it emits empty text.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    turns: Vec<ScriptTurn>,
    next: usize,
    last: Option<usize>,
}

impl ScriptedAgent {
    pub fn new(turns: Vec<ScriptTurn>) -> Self {
        ScriptedAgent {
            turns,
            next: 0,
            last: None,
        }
    }

    pub fn turns(&self) -> &[ScriptTurn] {
        &self.turns
    }
}

impl AgentModel for ScriptedAgent {
    fn respond(&mut self, req: &AgentRequest<'_>) -> String {
        let index = match (req.retry, self.last) {
            (true, Some(i)) => i,
            _ => {
                let i = self.next;
                self.next += 1;
                i
            }
        };
        self.last = Some(index);
        self.turns
            .get(index)
            .map(|t| t.render(req.output_format))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

/// Reads a line-delimited trace: one JSON record per line with `turn`,
/// `role` and `text`.
///
/// Roles: `assistant` (text is a JSON envelope, re-rendered per format),
/// `assistant_fenced` (same, wrapped in a code fence), `raw` (verbatim), and
/// `think` (a reasoning prefix for the same turn's reply).
pub fn parse_trace(text: &str) -> Result<Vec<ScriptTurn>, TraceError> {
    let mut turns: Vec<ScriptTurn> = Vec::new();
    let mut pending_think: Option<(usize, String)> = None;
    let mut last_turn: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TraceError { line: n, message };
        let record = decode_json(line).map_err(|e| err(e.to_string()))?;
        let obj = record
            .as_object()
            .ok_or_else(|| err("record is not an object".into()))?;
        let turn = match obj.get("turn") {
            Some(Value::Number(num)) if num.is_integer() => num
                .as_str()
                .parse::<usize>()
                .map_err(|_| err("turn must be a non-negative integer".into()))?,
            _ => return Err(err("missing integer field turn".into())),
        };
        let role = obj
            .get("role")
            .and_then(Value::as_text)
            .ok_or_else(|| err("missing string field role".into()))?;
        let body = obj
            .get("text")
            .and_then(Value::as_text)
            .ok_or_else(|| err("missing string field text".into()))?;
        if let Some(prev) = last_turn {
            if turn <= prev {
                return Err(err(format!("turn {turn} does not follow turn {prev}")));
            }
        }
        match role {
            "think" => {
                if pending_think.is_some() {
                    return Err(err("two think records for one turn".into()));
                }
                pending_think = Some((turn, body.to_owned()));
                continue;
            }
            "assistant" | "assistant_fenced" | "raw" => {}
            other => return Err(err(format!("unknown role {other:?}"))),
        }
        let think = match pending_think.take() {
            Some((t, text)) if t == turn => Some(text),
            Some((t, _)) => return Err(err(format!("think record for turn {t} has no reply"))),
            None => None,
        };
        let body = if role == "raw" {
            ScriptBody::Raw(body.to_owned())
        } else {
            let v = decode_json(body).map_err(|e| err(format!("assistant text is not JSON: {e}")))?;
            ScriptBody::Envelope(Envelope::from_value(&v).map_err(err)?)
        };
        turns.push(ScriptTurn {
            think,
            fenced: role == "assistant_fenced",
            body,
        });
        last_turn = Some(turn);
    }
    if let Some((t, _)) = pending_think {
        return Err(TraceError {
            line: text.lines().count(),
            message: format!("think record for turn {t} has no reply"),
        });
    }
    Ok(turns)
}

/// A deterministic corruption of a model reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutator {
    /// Cuts the last line just before its first structural character, as a
    /// reply stopped mid-generation would be.
    TruncateLastLine,
    /// Replaces the first key/value colon outside a string with `;`.
    SwapDelimiter,
    /// Renames `action` to `tool` (or `final_answer` to `answer`).
    RenameActionKey,
}

impl Mutator {
    pub const ALL: [Mutator; 3] = [
        Mutator::TruncateLastLine,
        Mutator::SwapDelimiter,
        Mutator::RenameActionKey,
    ];

    pub fn apply(self, raw: &str, format: Format) -> String {
        let split = think_prefix_len(raw);
        let (head, doc) = raw.split_at(split);
        let mutated = match self {
            Mutator::TruncateLastLine => truncate_last_line(doc),
            Mutator::SwapDelimiter => swap_first_colon(doc),
            Mutator::RenameActionKey => rename_key(doc, format),
        };
        format!("{head}{mutated}")
    }

    pub fn name(self) -> &'static str {
        match self {
            Mutator::TruncateLastLine => "truncate",
            Mutator::SwapDelimiter => "swap-delimiter",
            Mutator::RenameActionKey => "rename-key",
        }
    }
}

fn think_prefix_len(raw: &str) -> usize {
    let lead = raw.len() - raw.trim_start().len();
    if raw[lead..].starts_with("<think>") {
        if let Some(close) = raw[lead..].find("</think>") {
            return lead + close + "</think>".len();
        }
    }
    0
}

fn truncate_last_line(doc: &str) -> String {
    let trimmed = doc.trim_end();
    let line_start = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let line = &trimmed[line_start..];
    let indent = line.len() - line.trim_start().len();
    let content = &line[indent..];
    let cut = content
        .char_indices()
        .find(|&(i, c)| matches!(c, ':' | ',' | '"' | '[' | '{' | '(') || (i == 0 && c == '-'))
        .map(|(i, _)| i)
        .unwrap_or_else(|| {
            let half = content.len() / 2;
            (0..=half).rev().find(|&i| content.is_char_boundary(i)).unwrap_or(0)
        });
    format!("{}{}", &trimmed[..line_start + indent], &content[..cut])
}

fn swap_first_colon(doc: &str) -> String {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in doc.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
        } else if c == '"' {
            in_string = true;
        } else if c == ':' {
            return format!("{};{}", &doc[..i], &doc[i + 1..]);
        }
    }
    doc.to_owned()
}

fn rename_key(doc: &str, format: Format) -> String {
    let pairs = [("action", "tool"), ("final_answer", "answer")];
    for (from, to) in pairs {
        match format {
            Format::Json | Format::Tron => {
                let needle = format!("\"{from}\":");
                if doc.contains(&needle) {
                    return doc.replacen(&needle, &format!("\"{to}\":"), 1);
                }
            }
            Format::Toon => {
                let needle = format!("{from}:");
                let mut offset = 0;
                for line in doc.split_inclusive('\n') {
                    if line.starts_with(&needle) {
                        return format!("{}{to}{}", &doc[..offset], &doc[offset + from.len()..]);
                    }
                    offset += line.len();
                }
            }
        }
    }
    doc.to_owned()
}
