use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::json::{decode_json, encode_json, JsonError, JsonStyle};
use crate::toon::{decode_toon, encode_toon, ToonError, ToonGrammarConfig};
use crate::tron::{decode_tron, encode_tron, TronError};
use crate::value::Value;

/// One of the three notations, with default settings for each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Format {
    #[default]
    Json,
    Toon,
    Tron,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("json: {0}")]
    Json(#[from] JsonError),
    #[error("toon: {0}")]
    Toon(#[from] ToonError),
    #[error("tron: {0}")]
    Tron(#[from] TronError),
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Toon, Format::Tron];

    /// Minimal JSON, default-config TOON, or single-document TRON.
    pub fn encode(self, v: &Value) -> String {
        match self {
            Format::Json => encode_json(v, JsonStyle::Minimal),
            Format::Toon => encode_toon(v, &ToonGrammarConfig::default()),
            Format::Tron => encode_tron(v),
        }
    }

    pub fn decode(self, text: &str) -> Result<Value, DecodeError> {
        Ok(match self {
            Format::Json => decode_json(text)?,
            Format::Toon => decode_toon(text, &ToonGrammarConfig::default())?,
            Format::Tron => decode_tron(text)?,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Toon => "toon",
            Format::Tron => "tron",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Format::Json => "JSON",
            Format::Toon => "TOON",
            Format::Tron => "TRON",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "toon" => Ok(Format::Toon),
            "tron" => Ok(Format::Tron),
            other => Err(format!("unknown format {other:?} (expected json, toon or tron)")),
        }
    }
}
