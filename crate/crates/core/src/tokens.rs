//! Text-to-token counting.
//!
//! Three tokenizers: UTF-8 byte length, a word/symbol regex, and byte-level
//! BPE driven by a vocabulary file plus a ranked merge list in the common
//! `vocab.json` / `merges.txt` layout.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::json::decode_json;
use crate::value::Value;

#[derive(Debug, Error)]
pub enum VocabLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid merges line {line}: {message}")]
    Merges { line: usize, message: String },
}

#[derive(Debug, Clone, Default)]
pub enum Tokenizer {
    #[default]
    ByteCount,
    WordRegex,
    Bpe(BpeVocab),
}

impl Tokenizer {
    pub fn count(&self, text: &str) -> usize {
        match self {
            Tokenizer::ByteCount => text.len(),
            Tokenizer::WordRegex => word_regex().find_iter(text).count(),
            Tokenizer::Bpe(vocab) => vocab.count(text),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Tokenizer::ByteCount => "bytes",
            Tokenizer::WordRegex => "words",
            Tokenizer::Bpe(_) => "bpe",
        }
    }
}

pub fn count_tokens(text: &str, tok: &Tokenizer) -> usize {
    tok.count(text)
}

fn word_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+|[^\w\s]").expect("valid pattern"))
}

fn pretokenizer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"'(?:[sdmt]|ll|ve|re)| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+").expect("valid pattern")
    })
}

/// The reversible byte → printable-char table used by byte-level BPE vocabularies.
fn byte_alphabet() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..=255u8 {
            let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
            table[b as usize] = if printable {
                char::from(b)
            } else {
                let c = char::from_u32(256 + extra).expect("valid code point");
                extra += 1;
                c
            };
        }
        table
    })
}

/// A byte-level BPE model: token strings with ids and merge ranks.
#[derive(Debug, Clone)]
pub struct BpeVocab {
    ids: HashMap<String, u32>,
    ranks: HashMap<(String, String), usize>,
}

impl BpeVocab {
    /// Loads `vocab_path` (JSON object token → id) and `merges_path`
    /// (one `left right` pair per line, rank = line order).
    pub fn load(vocab_path: &Path, merges_path: &Path) -> Result<Self, VocabLoadError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| VocabLoadError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        BpeVocab::from_texts(&read(vocab_path)?, &read(merges_path)?)
    }

    pub fn from_texts(vocab: &str, merges: &str) -> Result<Self, VocabLoadError> {
        let parsed = decode_json(vocab).map_err(|e| VocabLoadError::Vocab(e.to_string()))?;
        let Value::Object(map) = parsed else {
            return Err(VocabLoadError::Vocab("expected a JSON object of token ids".into()));
        };
        let mut ids = HashMap::with_capacity(map.len());
        let mut used = std::collections::HashSet::new();
        for (token, id) in map.iter() {
            let id = match id {
                Value::Number(n) if n.is_integer() => n.as_str().parse::<u32>().ok(),
                _ => None,
            }
            .ok_or_else(|| VocabLoadError::Vocab(format!("token {token:?} has a non-integer id")))?;
            if !used.insert(id) {
                return Err(VocabLoadError::Vocab(format!("id {id} assigned twice")));
            }
            ids.insert(token.to_owned(), id);
        }
        let mut ranks = HashMap::new();
        let mut rank = 0;
        for (i, line) in merges.lines().enumerate() {
            if line.is_empty() || (i == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(VocabLoadError::Merges {
                    line: i + 1,
                    message: "expected two symbols".into(),
                });
            };
            if a.is_empty() || b.is_empty() {
                return Err(VocabLoadError::Merges {
                    line: i + 1,
                    message: "empty symbol".into(),
                });
            }
            let merged = format!("{a}{b}");
            if !ids.contains_key(&merged) {
                return Err(VocabLoadError::Merges {
                    line: i + 1,
                    message: format!("{merged:?} is not in the vocabulary"),
                });
            }
            ranks.entry((a.to_owned(), b.to_owned())).or_insert(rank);
            rank += 1;
        }
        Ok(BpeVocab { ids, ranks })
    }

    pub fn count(&self, text: &str) -> usize {
        self.tokenize(text)
            .iter()
            .map(|piece| {
                if self.ids.contains_key(piece) {
                    1
                } else {
                    piece.chars().count()
                }
            })
            .sum()
    }

    /// Final merged symbols. Symbols missing from the vocabulary count as
    /// one token per byte.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let alphabet = byte_alphabet();
        let mut out = Vec::new();
        for word in pretokenizer().find_iter(text) {
            let symbols: Vec<String> = word
                .as_str()
                .bytes()
                .map(|b| alphabet[b as usize].to_string())
                .collect();
            out.extend(self.merge(symbols));
        }
        out
    }

    fn merge(&self, mut symbols: Vec<String>) -> Vec<String> {
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, i)))
                .min();
            let Some((_, i)) = best else { break };
            let right = symbols.remove(i + 1);
            symbols[i].push_str(&right);
        }
        symbols
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }
}
