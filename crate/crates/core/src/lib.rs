//! Lossless JSON, TOON and TRON codecs over one ordered document model,
//! pluggable token counting, and a scripted tool-calling loop that records
//! where every token of a run came from.
//!
//! ```
//! use notation_core::{decode_toon, encode_toon, ToonGrammarConfig, Value};
//!
//! let v = Value::object([("friends", Value::Array(vec!["ana".into(), "luis".into()]))]);
//! let cfg = ToonGrammarConfig::default();
//! let text = encode_toon(&v, &cfg);
//! assert_eq!(text, "friends[2]: ana,luis");
//! assert_eq!(decode_toon(&text, &cfg).unwrap(), v);
//! ```

pub mod agent;
pub mod format;
pub mod json;
pub mod meter;
pub mod tokens;
pub mod toon;
pub mod tron;
pub mod value;

pub use format::{DecodeError, Format};
pub use json::{decode_json, encode_json, JsonError, JsonStyle};
pub use meter::{decompose, delta_vs_baseline, DeltaReport, Percent, TokenBreakdown};
pub use tokens::{count_tokens, BpeVocab, Tokenizer, VocabLoadError};
pub use toon::{classify_array, decode_toon, encode_toon, ArrayLayout, ToonError, ToonGrammarConfig};
pub use tron::{
    decode_tron, decode_tron_batch, encode_tron, encode_tron_batch, encode_tron_batch_with, encode_tron_with,
    extract_classes, ClassDef, ClassTable, TronError, TronOptions,
};
pub use value::{equals, generate, signature, GenProfile, Number, Object, StructSignature, Value};
