//! Token-Oriented Object Notation.
//!
//! Nesting is expressed by indentation, arrays of scalars are written inline
//! (`friends[3]: ana,luis,sam`), arrays of same-shaped flat objects become a
//! CSV-style table under a `key[N]{f1,f2}:` header, and anything else falls
//! back to `- ` item lines. Every array carries its length, which the
//! decoder checks.
//!
//! The grammar is key-rooted. A document whose root is not an object (or is
//! an object whose only key is `value`) is written as the single field
//! `value: ...` and unwrapped again on decode, which keeps the mapping
//! lossless.

use thiserror::Error;

use crate::json::{json_string, TermError, TermParser};
use crate::value::{is_number_literal, Object, StructSignature, Value};

const WRAP_KEY: &str = "value";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToonGrammarConfig {
    pub indent_width: usize,
    /// Smallest uniform object array written as a table.
    pub table_min_rows: usize,
    pub blank_line_between_top_level: bool,
}

impl Default for ToonGrammarConfig {
    fn default() -> Self {
        ToonGrammarConfig {
            indent_width: 2,
            table_min_rows: 2,
            blank_line_between_top_level: true,
        }
    }
}

impl ToonGrammarConfig {
    pub fn validate(&self) -> Result<(), ToonError> {
        if self.indent_width < 1 || self.table_min_rows < 2 {
            return Err(ToonError::Config(format!(
                "indent_width must be >= 1 and table_min_rows >= 2 (got {} and {})",
                self.indent_width, self.table_min_rows
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToonError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: declared length {declared}, found {actual}")]
    LengthMismatch {
        line: usize,
        declared: usize,
        actual: usize,
    },
    #[error("line {line}: table row has {actual} cells, header declares {expected}")]
    ArityMismatch {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: bad indentation")]
    IndentError { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrayLayout {
    PrimitiveInline,
    UniformTable(StructSignature),
    ItemList,
}

pub fn classify_array(items: &[Value], cfg: &ToonGrammarConfig) -> ArrayLayout {
    if items.iter().all(Value::is_scalar) {
        return ArrayLayout::PrimitiveInline;
    }
    if items.len() < cfg.table_min_rows {
        return ArrayLayout::ItemList;
    }
    let Some(first) = items[0].as_object() else {
        return ArrayLayout::ItemList;
    };
    let sig = first.signature();
    if sig.is_empty() {
        return ArrayLayout::ItemList;
    }
    let uniform = items.iter().all(|item| {
        item.as_object().is_some_and(|o| {
            o.signature() == sig
                && o.values()
                    .all(|v| v.is_scalar() && !matches!(v, Value::Text(s) if s.is_empty()))
        })
    });
    if uniform {
        ArrayLayout::UniformTable(sig)
    } else {
        ArrayLayout::ItemList
    }
}

pub fn encode_toon(v: &Value, cfg: &ToonGrammarConfig) -> String {
    let mut enc = Encoder { cfg, lines: Vec::new() };
    match v {
        Value::Object(obj) if !needs_wrap(obj) => {
            for (i, (k, item)) in obj.iter().enumerate() {
                if i > 0 && cfg.blank_line_between_top_level {
                    enc.lines.push((0, String::new()));
                }
                enc.field(&quote_key(k), item, 0);
            }
        }
        other => enc.field(WRAP_KEY, other, 0),
    }
    let mut out = String::new();
    for (i, (depth, text)) in enc.lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if !text.is_empty() {
            out.extend(std::iter::repeat_n(' ', depth * cfg.indent_width));
            out.push_str(text);
        }
    }
    out
}

fn needs_wrap(obj: &Object) -> bool {
    obj.len() == 1 && obj.contains_key(WRAP_KEY)
}

struct Encoder<'a> {
    cfg: &'a ToonGrammarConfig,
    lines: Vec<(usize, String)>,
}

impl Encoder<'_> {
    /// Writes `key` (already quoted as needed; empty for array items) and its
    /// value with the key line at `depth`.
    fn field(&mut self, key: &str, v: &Value, depth: usize) {
        match v {
            Value::Object(obj) => {
                self.lines.push((depth, format!("{key}:")));
                self.fields(obj, depth + 1);
            }
            Value::Array(items) => self.array(key, items, depth),
            scalar => self.lines.push((depth, format!("{key}: {}", scalar_text(scalar)))),
        }
    }

    fn fields(&mut self, obj: &Object, depth: usize) {
        for (k, item) in obj.iter() {
            self.field(&quote_key(k), item, depth);
        }
    }

    fn array(&mut self, key: &str, items: &[Value], depth: usize) {
        let n = items.len();
        match classify_array(items, self.cfg) {
            ArrayLayout::PrimitiveInline if n == 0 => self.lines.push((depth, format!("{key}[0]:"))),
            ArrayLayout::PrimitiveInline => {
                let cells: Vec<String> = items.iter().map(scalar_text).collect();
                self.lines.push((depth, format!("{key}[{n}]: {}", cells.join(","))));
            }
            ArrayLayout::UniformTable(sig) => {
                let header: Vec<String> = sig.keys().iter().map(|k| quote_key(k)).collect();
                self.lines.push((depth, format!("{key}[{n}]{{{}}}:", header.join(","))));
                for item in items {
                    let obj = item.as_object().expect("table rows are objects");
                    let cells: Vec<String> = obj.values().map(scalar_text).collect();
                    self.lines.push((depth + 1, cells.join(",")));
                }
            }
            ArrayLayout::ItemList => {
                self.lines.push((depth, format!("{key}[{n}]:")));
                for item in items {
                    self.item(item, depth + 1);
                }
            }
        }
    }

    /// A `- ` item whose dash sits at `depth`; its content behaves as if it
    /// were written one level deeper.
    fn item(&mut self, v: &Value, depth: usize) {
        let start = self.lines.len();
        match v {
            Value::Object(obj) if obj.is_empty() => {
                self.lines.push((depth, "-".to_owned()));
                return;
            }
            Value::Object(obj) => self.fields(obj, depth + 1),
            Value::Array(items) => self.array("", items, depth + 1),
            scalar => {
                self.lines.push((depth, format!("- {}", scalar_text(scalar))));
                return;
            }
        }
        let first = &mut self.lines[start];
        *first = (depth, format!("- {}", first.1));
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Text(s) if needs_quotes(s) => json_string(s),
        Value::Text(s) => s.clone(),
        other => {
            let mut out = String::new();
            crate::json::write_scalar(&mut out, other);
            out
        }
    }
}

/// Whether a string scalar must be quoted to decode back as the same string.
fn needs_quotes(s: &str) -> bool {
    if s.is_empty() || matches!(s, "true" | "false" | "null") || is_number_literal(s) {
        return true;
    }
    let first = s.chars().next().expect("non-empty");
    let last = s.chars().next_back().expect("non-empty");
    if first.is_whitespace() || last.is_whitespace() {
        return true;
    }
    // leading digit or sign: keeps number-looking text unambiguous for readers
    if first.is_ascii_digit() || first == '-' || first == '.' {
        return true;
    }
    s.chars()
        .any(|c| matches!(c, ',' | ':' | '"' | '[' | ']' | '{' | '}') || c.is_control())
}

fn quote_key(k: &str) -> String {
    let bare = !k.is_empty()
        && !k.starts_with('-')
        && !k.starts_with(char::is_whitespace)
        && !k.ends_with(char::is_whitespace)
        && !k
            .chars()
            .any(|c| matches!(c, ',' | ':' | '"' | '[' | ']' | '{' | '}' | '\\') || c.is_control());
    if bare {
        k.to_owned()
    } else {
        json_string(k)
    }
}

pub fn decode_toon(t: &str, cfg: &ToonGrammarConfig) -> Result<Value, ToonError> {
    cfg.validate()?;
    let mut lines = Vec::new();
    for (i, raw) in t.split('\n').enumerate() {
        let number = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let spaces = raw.len() - raw.trim_start_matches(' ').len();
        if raw[spaces..].starts_with(char::is_whitespace) || spaces % cfg.indent_width != 0 {
            return Err(ToonError::IndentError { line: number });
        }
        lines.push(Line {
            number,
            depth: spaces / cfg.indent_width,
            text: &raw[spaces..],
        });
    }
    let mut dec = Decoder { lines, pos: 0 };
    let root = dec.fields(0, Object::new())?;
    if let Some(line) = dec.lines.get(dec.pos) {
        return Err(ToonError::IndentError { line: line.number });
    }
    if needs_wrap(&root) {
        return Ok(root.into_entries().pop().expect("one entry").1);
    }
    Ok(Value::Object(root))
}

struct Line<'a> {
    number: usize,
    depth: usize,
    text: &'a str,
}

struct Decoder<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

/// What follows a key: `:` with an optional inline value, or an array header.
enum Header<'a> {
    Plain {
        rest: &'a str,
    },
    Array {
        len: usize,
        fields: Option<Vec<String>>,
        rest: &'a str,
    },
}

impl<'a> Decoder<'a> {
    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    /// Reads consecutive field lines at exactly `depth` into `obj`.
    fn fields(&mut self, depth: usize, mut obj: Object) -> Result<Object, ToonError> {
        while let Some(line) = self.peek() {
            if line.depth < depth {
                break;
            }
            if line.depth > depth {
                return Err(ToonError::IndentError { line: line.number });
            }
            let (number, text) = (line.number, line.text);
            self.pos += 1;
            let (key, rest) = split_key(text, number)?;
            let v = self.value_after_key(rest, depth, number)?;
            insert_unique(&mut obj, key, v, number)?;
        }
        Ok(obj)
    }

    /// Parses the remainder of a field line whose key sits at `depth`;
    /// children, if any, are read from `depth + 1`.
    fn value_after_key(&mut self, rest: &str, depth: usize, number: usize) -> Result<Value, ToonError> {
        match parse_header(rest, number)? {
            Header::Plain { rest: "" } => Ok(Value::Object(self.fields(depth + 1, Object::new())?)),
            Header::Plain { rest } => {
                let text = rest
                    .strip_prefix(' ')
                    .ok_or_else(|| syntax(number, "expected a space after ':'"))?;
                parse_scalar(text, number)
            }
            Header::Array {
                len,
                fields: Some(fields),
                rest,
            } => {
                if !rest.is_empty() {
                    return Err(syntax(number, "unexpected content after table header"));
                }
                self.table(len, &fields, depth + 1, number)
            }
            Header::Array {
                len,
                fields: None,
                rest: "",
            } => {
                let items = self.items(depth + 1)?;
                if items.len() != len {
                    return Err(ToonError::LengthMismatch {
                        line: number,
                        declared: len,
                        actual: items.len(),
                    });
                }
                Ok(Value::Array(items))
            }
            Header::Array {
                len,
                fields: None,
                rest,
            } => {
                let text = rest
                    .strip_prefix(' ')
                    .ok_or_else(|| syntax(number, "expected a space after ':'"))?;
                let cells = split_cells(text, number)?;
                if cells.len() != len {
                    return Err(ToonError::LengthMismatch {
                        line: number,
                        declared: len,
                        actual: cells.len(),
                    });
                }
                let items = cells
                    .into_iter()
                    .map(|c| parse_scalar(c, number))
                    .collect::<Result<_, _>>()?;
                Ok(Value::Array(items))
            }
        }
    }

    fn table(&mut self, len: usize, fields: &[String], depth: usize, header_line: usize) -> Result<Value, ToonError> {
        let mut rows = Vec::new();
        while let Some(line) = self.peek() {
            if line.depth < depth {
                break;
            }
            if line.depth > depth {
                return Err(ToonError::IndentError { line: line.number });
            }
            let (number, text) = (line.number, line.text);
            self.pos += 1;
            let cells = split_cells(text, number)?;
            if cells.len() != fields.len() {
                return Err(ToonError::ArityMismatch {
                    line: number,
                    expected: fields.len(),
                    actual: cells.len(),
                });
            }
            let mut obj = Object::new();
            for (f, cell) in fields.iter().zip(cells) {
                obj.insert(f.clone(), parse_scalar(cell, number)?)
                    .expect("header fields are unique");
            }
            rows.push(Value::Object(obj));
        }
        if rows.len() != len {
            return Err(ToonError::LengthMismatch {
                line: header_line,
                declared: len,
                actual: rows.len(),
            });
        }
        Ok(Value::Array(rows))
    }

    fn items(&mut self, depth: usize) -> Result<Vec<Value>, ToonError> {
        let mut items = Vec::new();
        while let Some(line) = self.peek() {
            if line.depth < depth {
                break;
            }
            if line.depth > depth {
                return Err(ToonError::IndentError { line: line.number });
            }
            let (number, text) = (line.number, line.text);
            self.pos += 1;
            let content = if text == "-" {
                items.push(Value::Object(Object::new()));
                continue;
            } else if let Some(c) = text.strip_prefix("- ") {
                c
            } else {
                return Err(syntax(number, "expected '- ' list item"));
            };
            items.push(self.item(content, depth, number)?);
        }
        Ok(items)
    }

    fn item(&mut self, content: &str, depth: usize, number: usize) -> Result<Value, ToonError> {
        if content.starts_with('[') {
            return self.value_after_key(content, depth + 1, number);
        }
        if !is_keyed(content, number)? {
            return parse_scalar(content, number);
        }
        let (key, rest) = split_key(content, number)?;
        let first = self.value_after_key(rest, depth + 1, number)?;
        let mut obj = Object::new();
        insert_unique(&mut obj, key, first, number)?;
        Ok(Value::Object(self.fields(depth + 1, obj)?))
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ToonError {
    ToonError::Syntax {
        line,
        message: message.into(),
    }
}

fn insert_unique(obj: &mut Object, key: String, v: Value, line: usize) -> Result<(), ToonError> {
    if obj.contains_key(&key) {
        return Err(ToonError::DuplicateKey { line, key });
    }
    obj.insert(key, v).expect("checked above");
    Ok(())
}

fn term_error(line: usize, e: TermError) -> ToonError {
    syntax(line, e.to_string())
}

/// Reads a quoted string at the start of `s`, returning it and the rest.
fn quoted_prefix(s: &str, line: usize) -> Result<(String, &str), ToonError> {
    let mut p = TermParser::new(s, None);
    let text = p.string_literal().map_err(|e| term_error(line, e))?;
    Ok((text, &s[p.position()..]))
}

/// Whether list-item content starts with a key rather than being a scalar.
fn is_keyed(content: &str, line: usize) -> Result<bool, ToonError> {
    if content.starts_with('"') {
        let (_, rest) = quoted_prefix(content, line)?;
        return Ok(rest.starts_with(':') || rest.starts_with('['));
    }
    Ok(content.contains([':', '[']))
}

fn split_key(text: &str, line: usize) -> Result<(String, &str), ToonError> {
    if text.starts_with('"') {
        return quoted_prefix(text, line);
    }
    let end = text
        .find([':', '['])
        .ok_or_else(|| syntax(line, "expected 'key:' or 'key[N]'"))?;
    let key = &text[..end];
    if key.is_empty() || key.starts_with(char::is_whitespace) || key.ends_with(char::is_whitespace) {
        return Err(syntax(line, "invalid bare key"));
    }
    Ok((key.to_owned(), &text[end..]))
}

fn parse_header(rest: &str, line: usize) -> Result<Header<'_>, ToonError> {
    if let Some(after) = rest.strip_prefix(':') {
        return Ok(Header::Plain { rest: after });
    }
    let Some(after) = rest.strip_prefix('[') else {
        return Err(syntax(line, "expected ':' or '['"));
    };
    let close = after
        .find(']')
        .ok_or_else(|| syntax(line, "unterminated length marker"))?;
    let digits = &after[..close];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0'))
    {
        return Err(syntax(line, "invalid length marker"));
    }
    let len: usize = digits.parse().map_err(|_| syntax(line, "length marker out of range"))?;
    let mut after = &after[close + 1..];
    let mut fields = None;
    if let Some(inner) = after.strip_prefix('{') {
        let (names, rest) = header_fields(inner, line)?;
        fields = Some(names);
        after = rest;
    }
    let rest = after
        .strip_prefix(':')
        .ok_or_else(|| syntax(line, "expected ':' after array header"))?;
    Ok(Header::Array { len, fields, rest })
}

/// Parses `f1,f2,...}` and returns the names plus the text after `}`.
fn header_fields(mut s: &str, line: usize) -> Result<(Vec<String>, &str), ToonError> {
    let mut names: Vec<String> = Vec::new();
    loop {
        let name = if s.starts_with('"') {
            let (name, rest) = quoted_prefix(s, line)?;
            s = rest;
            name
        } else {
            let end = s
                .find([',', '}'])
                .ok_or_else(|| syntax(line, "unterminated field list"))?;
            let name = &s[..end];
            if name.is_empty() || name.contains([':', '"', '[', '{']) {
                return Err(syntax(line, "invalid field name"));
            }
            s = &s[end..];
            name.to_owned()
        };
        if names.contains(&name) {
            return Err(ToonError::DuplicateKey { line, key: name });
        }
        names.push(name);
        match s.as_bytes().first() {
            Some(b',') => s = &s[1..],
            Some(b'}') => return Ok((names, &s[1..])),
            _ => return Err(syntax(line, "expected ',' or '}' in field list")),
        }
    }
}

/// Splits on commas outside quoted strings.
fn split_cells(text: &str, line: usize) -> Result<Vec<&str>, ToonError> {
    let mut cells = Vec::new();
    let mut start = 0;
    let mut in_quotes = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_quotes {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_quotes = false,
                _ => {}
            }
        } else if c == '"' {
            in_quotes = true;
        } else if c == ',' {
            cells.push(&text[start..i]);
            start = i + 1;
        }
    }
    if in_quotes {
        return Err(syntax(line, "unterminated string"));
    }
    cells.push(&text[start..]);
    Ok(cells)
}

fn parse_scalar(token: &str, line: usize) -> Result<Value, ToonError> {
    if token.starts_with('"') {
        let (text, rest) = quoted_prefix(token, line)?;
        if !rest.is_empty() {
            return Err(syntax(line, "unexpected content after quoted string"));
        }
        return Ok(Value::Text(text));
    }
    if token.is_empty() {
        return Err(syntax(line, "empty value"));
    }
    if token.starts_with(char::is_whitespace) || token.ends_with(char::is_whitespace) {
        return Err(syntax(line, "unquoted value with surrounding whitespace"));
    }
    Ok(match token {
        "null" => Value::Null,
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        t if is_number_literal(t) => Value::number(t),
        t => Value::Text(t.to_owned()),
    })
}
