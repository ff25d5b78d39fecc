//! Canonical JSON: minimal or pretty serializer and a strict parser.
//!
//! Minimal output is the baseline every token delta is measured against.
//! Strings are written as raw UTF-8; only `"`, `\` and control characters
//! are escaped.

use std::collections::HashMap;

use thiserror::Error;

use crate::value::{number_prefix_len, Number, Object, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JsonStyle {
    #[default]
    Minimal,
    Pretty {
        indent_width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsonError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("duplicate key {key:?} at byte {position}")]
    DuplicateKey { key: String, position: usize },
}

pub fn encode_json(v: &Value, style: JsonStyle) -> String {
    let mut out = String::new();
    match style {
        JsonStyle::Minimal => write_minimal(&mut out, v),
        JsonStyle::Pretty { indent_width } => write_pretty(&mut out, v, indent_width, 0),
    }
    out
}

pub fn decode_json(t: &str) -> Result<Value, JsonError> {
    let mut p = TermParser::new(t, None);
    let v = p.document().map_err(|e| match e {
        TermError::DuplicateKey { key, position } => JsonError::DuplicateKey { key, position },
        other => JsonError::Syntax {
            position: other.position(),
            message: other.to_string(),
        },
    })?;
    Ok(v)
}

fn write_minimal(out: &mut String, v: &Value) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_minimal(out, item);
            }
            out.push(']');
        }
        Value::Object(obj) => {
            out.push('{');
            for (i, (k, item)) in obj.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json_string(out, k);
                out.push(':');
                write_minimal(out, item);
            }
            out.push('}');
        }
        scalar => write_scalar(out, scalar),
    }
}

fn write_pretty(out: &mut String, v: &Value, width: usize, level: usize) {
    let pad = |out: &mut String, level: usize| out.extend(std::iter::repeat_n(' ', width * level));
    match v {
        Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(",\n");
                }
                pad(out, level + 1);
                write_pretty(out, item, width, level + 1);
            }
            out.push('\n');
            pad(out, level);
            out.push(']');
        }
        Value::Object(obj) if !obj.is_empty() => {
            out.push_str("{\n");
            for (i, (k, item)) in obj.iter().enumerate() {
                if i > 0 {
                    out.push_str(",\n");
                }
                pad(out, level + 1);
                write_json_string(out, k);
                out.push_str(": ");
                write_pretty(out, item, width, level + 1);
            }
            out.push('\n');
            pad(out, level);
            out.push('}');
        }
        other => write_minimal(out, other),
    }
}

pub(crate) fn write_scalar(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => out.push_str(n.as_str()),
        Value::Text(s) => write_json_string(out, s),
        Value::Array(_) | Value::Object(_) => unreachable!("not a scalar"),
    }
}

pub(crate) fn write_json_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

pub(crate) fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    write_json_string(&mut out, s);
    out
}

/// Errors from the shared term grammar (JSON plus TRON instances).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub(crate) enum TermError {
    #[error("{message}")]
    Syntax { position: usize, message: String },
    #[error("duplicate key {key:?}")]
    DuplicateKey { key: String, position: usize },
    #[error("unknown class {name}")]
    UnknownClass { name: String, position: usize },
    #[error("class {class} expects {expected} fields, got {actual}")]
    Arity {
        class: String,
        expected: usize,
        actual: usize,
        position: usize,
    },
}

impl TermError {
    pub(crate) fn position(&self) -> usize {
        match self {
            TermError::Syntax { position, .. }
            | TermError::DuplicateKey { position, .. }
            | TermError::UnknownClass { position, .. }
            | TermError::Arity { position, .. } => *position,
        }
    }
}

/// Recursive-descent reader over JSON terms. When `classes` is set, an
/// uppercase identifier followed by `(` is read as a positional instance.
pub(crate) struct TermParser<'a> {
    src: &'a str,
    pos: usize,
    classes: Option<&'a HashMap<String, Vec<String>>>,
}

impl<'a> TermParser<'a> {
    pub(crate) fn new(src: &'a str, classes: Option<&'a HashMap<String, Vec<String>>>) -> Self {
        TermParser { src, pos: 0, classes }
    }

    /// Exactly one term, surrounded only by whitespace.
    pub(crate) fn document(&mut self) -> Result<Value, TermError> {
        self.skip_ws();
        let v = self.term(0)?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.syntax("trailing content after value"));
        }
        Ok(v)
    }

    /// A single JSON string literal starting at the current position.
    pub(crate) fn string_literal(&mut self) -> Result<String, TermError> {
        self.string()
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes().get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> TermError {
        TermError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), TermError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{}'", b as char)))
        }
    }

    fn term(&mut self, depth: usize) -> Result<Value, TermError> {
        if depth > 512 {
            return Err(self.syntax("nesting too deep"));
        }
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'{') => self.object(depth),
            Some(b'[') => self.array(depth),
            Some(b'"') => self.string().map(Value::Text),
            Some(b'-' | b'0'..=b'9') => self.number(),
            Some(b'A'..=b'Z') if self.classes.is_some() => self.instance(depth),
            Some(b'a'..=b'z') => self.literal(),
            Some(c) => Err(self.syntax(format!("unexpected character {:?}", c as char))),
        }
    }

    fn literal(&mut self) -> Result<Value, TermError> {
        let rest = &self.src[self.pos..];
        for (word, v) in [
            ("null", Value::Null),
            ("true", Value::Bool(true)),
            ("false", Value::Bool(false)),
        ] {
            if rest.starts_with(word) {
                self.pos += word.len();
                return Ok(v);
            }
        }
        Err(self.syntax("invalid literal"))
    }

    fn number(&mut self) -> Result<Value, TermError> {
        let len = number_prefix_len(&self.bytes()[self.pos..]).ok_or_else(|| self.syntax("invalid number"))?;
        let lit = &self.src[self.pos..self.pos + len];
        self.pos += len;
        Ok(Value::Number(Number::parse(lit).expect("grammar checked")))
    }

    fn array(&mut self, depth: usize) -> Result<Value, TermError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Value::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.term(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Value::Array(items));
                }
                _ => return Err(self.syntax("expected ',' or ']'")),
            }
        }
    }

    fn object(&mut self, depth: usize) -> Result<Value, TermError> {
        self.expect(b'{')?;
        let mut obj = Object::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Value::Object(obj));
        }
        loop {
            self.skip_ws();
            let key_pos = self.pos;
            if self.peek() != Some(b'"') {
                return Err(self.syntax("expected string key"));
            }
            let key = self.string()?;
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let v = self.term(depth + 1)?;
            if obj.contains_key(&key) {
                return Err(TermError::DuplicateKey { key, position: key_pos });
            }
            obj.insert(key, v).expect("checked above");
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(obj));
                }
                _ => return Err(self.syntax("expected ',' or '}'")),
            }
        }
    }

    fn instance(&mut self, depth: usize) -> Result<Value, TermError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'A'..=b'Z')) {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() != Some(b'(') {
            return Err(self.syntax("expected '(' after class name"));
        }
        let fields = self
            .classes
            .and_then(|c| c.get(name))
            .ok_or_else(|| TermError::UnknownClass {
                name: name.to_owned(),
                position: start,
            })?;
        self.pos += 1;
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
        } else {
            loop {
                self.skip_ws();
                args.push(self.term(depth + 1)?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.syntax("expected ',' or ')'")),
                }
            }
        }
        if args.len() != fields.len() {
            return Err(TermError::Arity {
                class: name.to_owned(),
                expected: fields.len(),
                actual: args.len(),
                position: start,
            });
        }
        let obj = Object::from_pairs(fields.iter().cloned().zip(args))
            .map_err(|key| TermError::DuplicateKey { key, position: start })?;
        Ok(Value::Object(obj))
    }

    fn string(&mut self) -> Result<String, TermError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(self.syntax("unterminated string"));
            };
            match c {
                '"' => {
                    self.pos += 1;
                    return Ok(out);
                }
                '\\' => {
                    self.pos += 1;
                    let esc = self.peek().ok_or_else(|| self.syntax("unterminated escape"))?;
                    self.pos += 1;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => out.push(self.unicode_escape()?),
                        _ => return Err(self.syntax("invalid escape")),
                    }
                }
                c if (c as u32) < 0x20 => return Err(self.syntax("unescaped control character in string")),
                c => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, TermError> {
        let digits = self
            .src
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.syntax("short \\u escape"))?;
        if !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(self.syntax("invalid \\u escape"));
        }
        self.pos += 4;
        Ok(u32::from_str_radix(digits, 16).expect("hex digits"))
    }

    fn unicode_escape(&mut self) -> Result<char, TermError> {
        let hi = self.hex4()?;
        let code = if (0xD800..0xDC00).contains(&hi) {
            if !self.src[self.pos..].starts_with("\\u") {
                return Err(self.syntax("unpaired surrogate"));
            }
            self.pos += 2;
            let lo = self.hex4()?;
            if !(0xDC00..0xE000).contains(&lo) {
                return Err(self.syntax("invalid low surrogate"));
            }
            0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
        } else {
            hi
        };
        char::from_u32(code).ok_or_else(|| self.syntax("invalid code point"))
    }
}
