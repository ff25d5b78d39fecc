//! The format-neutral document tree shared by every codec.
//!
//! A [`Value`] is an ordered tree: objects keep their keys in insertion
//! order and reject duplicates, and numbers are kept as the exact decimal
//! literal they were read from, so `7.5` and `7` (or `7.0`) never collapse
//! into each other when a document passes through JSON, TOON and TRON.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An exact decimal literal in JSON number syntax.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Number(String);

impl Number {
    /// Accepts `s` only if it is a complete JSON number literal.
    pub fn parse(s: &str) -> Option<Number> {
        if is_number_literal(s) {
            Some(Number(s.to_owned()))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the literal has neither a fraction nor an exponent.
    pub fn is_integer(&self) -> bool {
        !self.0.contains(['.', 'e', 'E'])
    }
}

impl From<i64> for Number {
    fn from(n: i64) -> Self {
        Number(n.to_string())
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Checks the JSON number grammar: `-? (0 | [1-9][0-9]*) (. [0-9]+)? ([eE] [+-]? [0-9]+)?`.
pub fn is_number_literal(s: &str) -> bool {
    number_prefix_len(s.as_bytes()) == Some(s.len())
}

/// Length of the longest JSON number literal at the start of `b`, if any.
pub(crate) fn number_prefix_len(b: &[u8]) -> Option<usize> {
    let mut i = 0;
    if b.first() == Some(&b'-') {
        i += 1;
    }
    match b.get(i) {
        Some(b'0') => i += 1,
        Some(b'1'..=b'9') => {
            while matches!(b.get(i), Some(b'0'..=b'9')) {
                i += 1;
            }
        }
        _ => return None,
    }
    if b.get(i) == Some(&b'.') {
        let start = i + 1;
        let mut j = start;
        while matches!(b.get(j), Some(b'0'..=b'9')) {
            j += 1;
        }
        if j == start {
            return None;
        }
        i = j;
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        let start = j;
        while matches!(b.get(j), Some(b'0'..=b'9')) {
            j += 1;
        }
        if j == start {
            return None;
        }
        i = j;
    }
    Some(i)
}

/// An object's ordered key list. Equal only when the keys match in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructSignature(Vec<String>);

impl StructSignature {
    pub fn new(keys: Vec<String>) -> Self {
        StructSignature(keys)
    }

    pub fn keys(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Insertion-ordered map from text keys to values with unique keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Object {
    entries: Vec<(String, Value)>,
}

impl Object {
    pub fn new() -> Self {
        Object::default()
    }

    /// Appends a pair. Returns the value back if `key` is already present.
    pub fn insert(&mut self, key: impl Into<String>, value: Value) -> Result<(), Value> {
        let key = key.into();
        if self.contains_key(&key) {
            return Err(value);
        }
        self.entries.push((key, value));
        Ok(())
    }

    /// Builds an object from pairs, failing with the first repeated key.
    pub fn from_pairs<K: Into<String>>(pairs: impl IntoIterator<Item = (K, Value)>) -> Result<Object, String> {
        let mut obj = Object::new();
        for (k, v) in pairs {
            let k = k.into();
            if obj.contains_key(&k) {
                return Err(k);
            }
            obj.entries.push((k, v));
        }
        Ok(obj)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn signature(&self) -> StructSignature {
        StructSignature(self.entries.iter().map(|(k, _)| k.clone()).collect())
    }

    pub fn into_entries(self) -> Vec<(String, Value)> {
        self.entries
    }
}

/// A document tree node.
///
/// The derived `PartialEq` is key-order-sensitive; use [`equals`] for the
/// order-insensitive comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Number(Number),
    Text(String),
    Array(Vec<Value>),
    Object(Object),
}

impl Value {
    pub fn is_scalar(&self) -> bool {
        !matches!(self, Value::Array(_) | Value::Object(_))
    }

    pub fn as_object(&self) -> Option<&Object> {
        match self {
            Value::Object(o) => Some(o),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    /// Panics if `lit` is not a JSON number literal.
    pub fn number(lit: &str) -> Value {
        Value::Number(Number::parse(lit).unwrap_or_else(|| panic!("not a number literal: {lit:?}")))
    }

    /// Builds an object value; panics on a repeated key.
    pub fn object<K: Into<String>>(pairs: impl IntoIterator<Item = (K, Value)>) -> Value {
        match Object::from_pairs(pairs) {
            Ok(o) => Value::Object(o),
            Err(k) => panic!("duplicate key {k:?}"),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Number(Number::from(n))
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Structural equality. With `key_order_sensitive` unset, objects holding
/// the same pairs in a different order compare equal.
pub fn equals(a: &Value, b: &Value, key_order_sensitive: bool) -> bool {
    if key_order_sensitive {
        return a == b;
    }
    match (a, b) {
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| equals(p, q, false)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| equals(v, w, false)))
        }
        _ => a == b,
    }
}

pub fn signature(v: &Value) -> Option<StructSignature> {
    v.as_object().map(Object::signature)
}

/// The shape of generated documents.
#[derive(Debug, Clone, PartialEq)]
pub struct GenProfile {
    /// Nesting limit; zero yields scalars only. Capped at 8.
    pub max_depth: usize,
    /// Capped at 64.
    pub max_array_len: usize,
    pub max_object_len: usize,
    /// Capped at 16.
    pub max_key_len: usize,
    /// Emit a uniform table (an array of at least three objects sharing one
    /// signature, scalar cells only) instead of a free-form tree.
    pub tabular: bool,
    /// Bias string and key choices toward delimiter-bearing pool entries.
    pub delimiter_heavy: bool,
}

impl Default for GenProfile {
    fn default() -> Self {
        GenProfile {
            max_depth: 4,
            max_array_len: 6,
            max_object_len: 5,
            max_key_len: 8,
            tabular: false,
            delimiter_heavy: false,
        }
    }
}

impl GenProfile {
    pub fn scalar() -> Self {
        GenProfile {
            max_depth: 0,
            ..GenProfile::default()
        }
    }

    pub fn tabular() -> Self {
        GenProfile {
            tabular: true,
            max_array_len: 12,
            ..GenProfile::default()
        }
    }

    pub fn delimiter_heavy() -> Self {
        GenProfile {
            delimiter_heavy: true,
            ..GenProfile::default()
        }
    }

    fn clamped(&self) -> GenProfile {
        GenProfile {
            max_depth: self.max_depth.min(8),
            max_array_len: self.max_array_len.min(64),
            max_object_len: self.max_object_len.max(1),
            max_key_len: self.max_key_len.clamp(1, 16),
            ..self.clone()
        }
    }
}

/// Strings that collide with some codec's syntax.
const STRESS_STRINGS: &[&str] = &[
    "",
    " ",
    "a,b",
    "key: value",
    "say \"hi\"",
    "f(x)",
    "A(1,2)",
    ")(",
    "line1\nline2",
    "tab\there",
    "cr\rlf",
    "7",
    "007",
    "1e5",
    "-3.25",
    "3rd place",
    "true",
    "false",
    "null",
    "- item",
    "-",
    "[1]",
    "{x}",
    "items[2]: a,b",
    "back\\slash",
    " padded ",
    "trailing ",
    "héllo wörld",
    "日本語",
    "emoji 🙂",
    "class A: x",
    "\u{1}ctl",
    "value",
    "#hash",
    "a]b}",
    "``` fence",
    "<think>",
];

const PLAIN_WORDS: &[&str] = &[
    "ana",
    "luis",
    "sam",
    "Boulder",
    "spring_2025",
    "Blue Lake Trail",
    "id",
    "name",
    "query",
    "city",
    "Ridge Overlook",
    "ok",
    "search",
    "weather",
    "x",
    "distanceKm",
];

const KEY_ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'i', 'k', 'n', 'x', 'y', 'z', 'A', 'K', '_', '0', '1', '9',
];
const KEY_STRESS: &[char] = &[',', ':', '"', ' ', '[', ']', '{', '}', '(', ')', '-', '\n', '\\', 'é'];

/// Deterministically generates a document for `(seed, profile)`.
pub fn generate(seed: u64, profile: &GenProfile) -> Value {
    let profile = profile.clamped();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Generator {
        rng: &mut rng,
        profile: &profile,
    };
    if profile.tabular {
        g.table()
    } else {
        g.value(profile.max_depth)
    }
}

struct Generator<'a> {
    rng: &'a mut ChaCha8Rng,
    profile: &'a GenProfile,
}

impl Generator<'_> {
    fn value(&mut self, depth: usize) -> Value {
        if depth == 0 || self.rng.gen_bool(0.35) {
            return self.scalar();
        }
        match self.rng.gen_range(0..10) {
            0..=3 => self.object(depth),
            4..=5 => self.array(depth),
            6..=7 => self.uniform_objects(depth),
            _ => {
                let len = self.rng.gen_range(0..=self.profile.max_array_len);
                Value::Array((0..len).map(|_| self.scalar()).collect())
            }
        }
    }

    fn object(&mut self, depth: usize) -> Value {
        let len = self.rng.gen_range(0..=self.profile.max_object_len);
        let keys = self.distinct_keys(len);
        let pairs = keys.into_iter().map(|k| {
            let v = self.value(depth - 1);
            (k, v)
        });
        Value::Object(Object::from_pairs(pairs.collect::<Vec<_>>()).expect("keys are distinct"))
    }

    fn array(&mut self, depth: usize) -> Value {
        let len = self.rng.gen_range(0..=self.profile.max_array_len);
        Value::Array((0..len).map(|_| self.value(depth - 1)).collect())
    }

    /// Arrays of objects sharing keys, with nested values allowed, so that
    /// both table and class paths get exercised with awkward cells.
    fn uniform_objects(&mut self, depth: usize) -> Value {
        let keys = {
            let n = self.rng.gen_range(1..=self.profile.max_object_len);
            self.distinct_keys(n)
        };
        let rows = self.rng.gen_range(1..=self.profile.max_array_len.max(1));
        let nested = self.rng.gen_bool(0.3);
        let arr = (0..rows)
            .map(|_| {
                let pairs: Vec<(String, Value)> = keys
                    .iter()
                    .map(|k| {
                        let v = if nested { self.value(depth - 1) } else { self.scalar() };
                        (k.clone(), v)
                    })
                    .collect();
                Value::Object(Object::from_pairs(pairs).expect("keys are distinct"))
            })
            .collect();
        Value::Array(arr)
    }

    fn table(&mut self) -> Value {
        let cols = self.rng.gen_range(2..=self.profile.max_object_len.max(2));
        let keys = self.distinct_keys(cols);
        let rows = self.rng.gen_range(3..=self.profile.max_array_len.max(3));
        let arr = (0..rows)
            .map(|_| {
                let pairs: Vec<(String, Value)> = keys.iter().map(|k| (k.clone(), self.short_scalar())).collect();
                Value::Object(Object::from_pairs(pairs).expect("keys are distinct"))
            })
            .collect();
        Value::Array(arr)
    }

    fn distinct_keys(&mut self, n: usize) -> Vec<String> {
        let mut keys: Vec<String> = Vec::with_capacity(n);
        while keys.len() < n {
            let k = self.key();
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys
    }

    fn key(&mut self) -> String {
        if self.profile.delimiter_heavy && self.rng.gen_bool(0.3) {
            return (*STRESS_STRINGS.choose(&mut *self.rng).unwrap())
                .chars()
                .take(self.profile.max_key_len)
                .collect();
        }
        let len = self.rng.gen_range(1..=self.profile.max_key_len);
        let stress = self.profile.delimiter_heavy || self.rng.gen_bool(0.1);
        (0..len)
            .map(|_| {
                if stress && self.rng.gen_bool(0.25) {
                    *KEY_STRESS.choose(&mut *self.rng).unwrap()
                } else {
                    *KEY_ALPHABET.choose(&mut *self.rng).unwrap()
                }
            })
            .collect()
    }

    fn scalar(&mut self) -> Value {
        match self.rng.gen_range(0..10) {
            0 => Value::Null,
            1 => Value::Bool(self.rng.gen()),
            2..=4 => self.number(),
            _ => Value::Text(self.string()),
        }
    }

    /// Non-empty, mostly short cells for the tabular profile.
    fn short_scalar(&mut self) -> Value {
        match self.rng.gen_range(0..6) {
            0 => Value::Bool(self.rng.gen()),
            1 | 2 => self.number(),
            _ => {
                let s = if self.profile.delimiter_heavy && self.rng.gen_bool(0.3) {
                    (*STRESS_STRINGS[1..].choose(&mut *self.rng).unwrap()).to_owned()
                } else {
                    (*PLAIN_WORDS.choose(&mut *self.rng).unwrap()).to_owned()
                };
                Value::Text(s)
            }
        }
    }

    fn number(&mut self) -> Value {
        let lit = match self.rng.gen_range(0..6) {
            0 => self.rng.gen_range(-1000i64..1000).to_string(),
            1 => self.rng.gen::<i64>().to_string(),
            2 => format!("{}.{}", self.rng.gen_range(0..100), self.rng.gen_range(0..10)),
            3 => format!("-{}.{:02}", self.rng.gen_range(0..10), self.rng.gen_range(0..100)),
            4 => format!("{}e{}", self.rng.gen_range(1..10), self.rng.gen_range(-5..6)),
            _ => ["0", "-0", "7.5", "9.2", "1.0", "2.50", "1E+3", "0.001"]
                .choose(&mut *self.rng)
                .unwrap()
                .to_string(),
        };
        Value::number(&lit)
    }

    fn string(&mut self) -> String {
        let stress_p = if self.profile.delimiter_heavy { 0.7 } else { 0.3 };
        if self.rng.gen_bool(stress_p) {
            return (*STRESS_STRINGS.choose(&mut *self.rng).unwrap()).to_owned();
        }
        let words = self.rng.gen_range(1..=3);
        (0..words)
            .map(|_| *PLAIN_WORDS.choose(&mut *self.rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    }
}
