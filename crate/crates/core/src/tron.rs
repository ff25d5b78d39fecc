//! Token-Reduced Object Notation.
//!
//! Objects whose key sequence repeats are declared once as a class
//! (`class A: id,name,distanceKm`) and then written positionally
//! (`A(1,"Blue Lake Trail",7.5)`). Everything else is minimal JSON. A batch
//! shares one class block across several documents, one body per line.

use std::collections::HashMap;

use indexmap::IndexMap;
use thiserror::Error;

use crate::json::{json_string, write_json_string, write_scalar, TermError, TermParser};
use crate::value::{StructSignature, Value};

pub const DEFAULT_MIN_OCCURRENCES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub fields: StructSignature,
}

/// Classes in discovery order plus a signature → position index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassTable {
    defs: Vec<ClassDef>,
    index: HashMap<StructSignature, usize>,
}

impl ClassTable {
    pub fn defs(&self) -> &[ClassDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn lookup(&self, sig: &StructSignature) -> Option<&ClassDef> {
        self.index.get(sig).map(|&i| &self.defs[i])
    }

    fn push(&mut self, fields: StructSignature) {
        let name = class_name(self.defs.len());
        self.index.insert(fields.clone(), self.defs.len());
        self.defs.push(ClassDef { name, fields });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TronOptions {
    /// How often a signature must occur before it earns a class.
    pub min_occurrences: usize,
}

impl Default for TronOptions {
    fn default() -> Self {
        TronOptions {
            min_occurrences: DEFAULT_MIN_OCCURRENCES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TronError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("class {class} expects {expected} arguments, got {actual}")]
    ArityMismatch {
        class: String,
        expected: usize,
        actual: usize,
    },
    #[error("class {0} declared twice")]
    DuplicateClass(String),
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
}

/// `0 → A`, `25 → Z`, `26 → AA`, ...
pub fn class_name(mut index: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Counts every non-empty object's signature across `roots` (pre-order,
/// field order) and classes those seen at least `min_occurrences` times.
pub fn extract_classes(roots: &[Value], min_occurrences: usize) -> ClassTable {
    let mut counts: IndexMap<StructSignature, usize> = IndexMap::new();
    fn walk(v: &Value, counts: &mut IndexMap<StructSignature, usize>) {
        match v {
            Value::Object(obj) => {
                if !obj.is_empty() {
                    *counts.entry(obj.signature()).or_insert(0) += 1;
                }
                obj.values().for_each(|c| walk(c, counts));
            }
            Value::Array(items) => items.iter().for_each(|c| walk(c, counts)),
            _ => {}
        }
    }
    roots.iter().for_each(|r| walk(r, &mut counts));
    let mut table = ClassTable::default();
    for (sig, n) in counts {
        if n >= min_occurrences.max(1) {
            table.push(sig);
        }
    }
    table
}

pub fn encode_tron(v: &Value) -> String {
    encode_tron_with(v, TronOptions::default())
}

pub fn encode_tron_with(v: &Value, opts: TronOptions) -> String {
    encode_tron_batch_with(std::slice::from_ref(v), opts)
}

pub fn encode_tron_batch(roots: &[Value]) -> String {
    encode_tron_batch_with(roots, TronOptions::default())
}

pub fn encode_tron_batch_with(roots: &[Value], opts: TronOptions) -> String {
    let table = extract_classes(roots, opts.min_occurrences);
    let mut out = String::new();
    for def in table.defs() {
        out.push_str("class ");
        out.push_str(&def.name);
        out.push_str(": ");
        let fields: Vec<String> = def.fields.keys().iter().map(|k| field_name(k)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if !table.is_empty() {
        out.push('\n');
    }
    for (i, root) in roots.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_term(&mut out, root, &table);
    }
    out
}

fn is_bare_field(k: &str) -> bool {
    !k.is_empty()
        && k.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '$' | '-' | '.'))
}

fn field_name(k: &str) -> String {
    if is_bare_field(k) {
        k.to_owned()
    } else {
        json_string(k)
    }
}

fn write_term(out: &mut String, v: &Value, table: &ClassTable) {
    match v {
        Value::Object(obj) => {
            if let Some(def) = (!obj.is_empty()).then(|| table.lookup(&obj.signature())).flatten() {
                out.push_str(&def.name);
                out.push('(');
                for (i, item) in obj.values().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_term(out, item, table);
                }
                out.push(')');
            } else {
                out.push('{');
                for (i, (k, item)) in obj.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_json_string(out, k);
                    out.push(':');
                    write_term(out, item, table);
                }
                out.push('}');
            }
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term(out, item, table);
            }
            out.push(']');
        }
        scalar => write_scalar(out, scalar),
    }
}

pub fn decode_tron(t: &str) -> Result<Value, TronError> {
    let mut roots = decode_tron_batch(t)?;
    if roots.len() != 1 {
        return Err(TronError::Syntax {
            line: 1,
            column: 1,
            message: format!("expected one document body, found {}", roots.len()),
        });
    }
    Ok(roots.pop().expect("one root"))
}

/// Bodies are one per line; a single final line terminator is allowed.
pub fn decode_tron_batch(t: &str) -> Result<Vec<Value>, TronError> {
    let t = t.strip_suffix('\n').unwrap_or(t);
    let lines: Vec<&str> = t.split('\n').collect();
    let mut classes: HashMap<String, Vec<String>> = HashMap::new();
    let mut i = 0;
    while let Some(rest) = lines.get(i).and_then(|l| l.strip_prefix("class ")) {
        let (name, fields) = parse_class_line(rest, i + 1)?;
        if classes.contains_key(&name) {
            return Err(TronError::DuplicateClass(name));
        }
        classes.insert(name, fields);
        i += 1;
    }
    if !classes.is_empty() {
        if lines.get(i) != Some(&"") {
            return Err(syntax(i + 1, 1, "expected a blank line after the class block"));
        }
        i += 1;
    }
    if i >= lines.len() {
        return Err(syntax(i + 1, 1, "missing document body"));
    }
    let lookup = Some(&classes);
    lines[i..]
        .iter()
        .enumerate()
        .map(|(j, body)| {
            let line = i + j + 1;
            if body.trim().is_empty() {
                return Err(syntax(line, 1, "empty document body"));
            }
            TermParser::new(body, lookup)
                .document()
                .map_err(|e| body_error(e, line))
        })
        .collect()
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> TronError {
    TronError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn body_error(e: TermError, line: usize) -> TronError {
    match e {
        TermError::Syntax { position, message } => syntax(line, position + 1, message),
        TermError::DuplicateKey { key, .. } => TronError::DuplicateKey { line, key },
        TermError::UnknownClass { name, .. } => TronError::UnknownClass(name),
        TermError::Arity {
            class,
            expected,
            actual,
            ..
        } => TronError::ArityMismatch {
            class,
            expected,
            actual,
        },
    }
}

/// Parses `Name: f1,f2,...` (the text after `class `).
fn parse_class_line(rest: &str, line: usize) -> Result<(String, Vec<String>), TronError> {
    let col = |s: &str| 7 + rest.len() - s.len();
    let name_len = rest.bytes().take_while(u8::is_ascii_uppercase).count();
    if name_len == 0 {
        return Err(syntax(line, 7, "expected class name"));
    }
    let name = rest[..name_len].to_owned();
    let mut s = rest[name_len..]
        .strip_prefix(": ")
        .ok_or_else(|| syntax(line, 7 + name_len, "expected ': ' after class name"))?;
    let mut fields: Vec<String> = Vec::new();
    loop {
        let field = if s.starts_with('"') {
            let mut p = TermParser::new(s, None);
            let f = p.string_literal().map_err(|e| syntax(line, col(s), e.to_string()))?;
            s = &s[p.position()..];
            f
        } else {
            let end = s.find(',').unwrap_or(s.len());
            let f = &s[..end];
            if !is_bare_field(f) {
                return Err(syntax(line, col(s), "invalid field name"));
            }
            s = &s[end..];
            f.to_owned()
        };
        if fields.contains(&field) {
            return Err(TronError::DuplicateKey { line, key: field });
        }
        fields.push(field);
        match s.as_bytes().first() {
            None => return Ok((name, fields)),
            Some(b',') => s = &s[1..],
            Some(_) => return Err(syntax(line, col(s), "expected ',' between fields")),
        }
    }
}
