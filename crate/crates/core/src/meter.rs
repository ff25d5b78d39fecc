//! Schema / call / result token decomposition and relative deltas.

use std::fmt;

use thiserror::Error;

use crate::agent::TrajectoryRecord;
use crate::tokens::Tokenizer;

/// Where a span of transcript text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Schema,
    Call,
    Result,
    Other,
}

/// Whether the model read the span or wrote it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Prompt,
    Completion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub origin: Option<Origin>,
    pub channel: Channel,
    pub text: String,
}

impl Span {
    pub fn new(origin: Origin, channel: Channel, text: impl Into<String>) -> Self {
        Span {
            origin: Some(origin),
            channel,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenBreakdown {
    pub schema_tokens: usize,
    pub call_tokens: usize,
    pub result_tokens: usize,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
    pub total: usize,
}

impl TokenBreakdown {
    fn components(&self) -> [(&'static str, usize); 6] {
        [
            ("schema", self.schema_tokens),
            ("call", self.call_tokens),
            ("result", self.result_tokens),
            ("prompt", self.prompt_tokens),
            ("completion", self.completion_tokens),
            ("total", self.total),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeterError {
    #[error("turn {turn}, span {span} has no origin tag")]
    UntaggedSpan { turn: usize, span: usize },
}

/// Sums tagged spans into components and channels into prompt/completion.
pub fn decompose(tr: &TrajectoryRecord, tok: &Tokenizer) -> Result<TokenBreakdown, MeterError> {
    let mut b = TokenBreakdown::default();
    for (t, turn) in tr.turns.iter().enumerate() {
        for (s, span) in turn.spans.iter().enumerate() {
            let origin = span.origin.ok_or(MeterError::UntaggedSpan { turn: t, span: s })?;
            let n = tok.count(&span.text);
            match origin {
                Origin::Schema => b.schema_tokens += n,
                Origin::Call => b.call_tokens += n,
                Origin::Result => b.result_tokens += n,
                Origin::Other => {}
            }
            match span.channel {
                Channel::Prompt => b.prompt_tokens += n,
                Channel::Completion => b.completion_tokens += n,
            }
        }
    }
    b.total = b.prompt_tokens + b.completion_tokens;
    Ok(b)
}

/// A signed percentage rounded to one decimal, or `None` ("n/a") when the
/// baseline is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percent(pub Option<f64>);

impl Percent {
    pub fn change(value: f64, base: f64) -> Percent {
        if base == 0.0 {
            return Percent(None);
        }
        Percent(Some(round_tenth((value - base) / base * 100.0)))
    }
}

/// Rounds half away from zero at the first decimal.
pub fn round_tenth(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(0.0) => f.write_str("0.0%"),
            Some(p) => write!(f, "{p:+.1}%"),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub baseline: String,
    pub schema: Percent,
    pub call: Percent,
    pub result: Percent,
    pub prompt: Percent,
    pub completion: Percent,
    pub total: Percent,
}

impl DeltaReport {
    pub fn rows(&self) -> [(&'static str, Percent); 6] {
        [
            ("schema", self.schema),
            ("call", self.call),
            ("result", self.result),
            ("prompt", self.prompt),
            ("completion", self.completion),
            ("total", self.total),
        ]
    }
}

pub fn delta_vs_baseline(x: &TokenBreakdown, base: &TokenBreakdown, baseline: &str) -> DeltaReport {
    let pct = |a: usize, b: usize| Percent::change(a as f64, b as f64);
    let [s, c, r, p, k, t] = {
        let xs = x.components();
        let bs = base.components();
        [0, 1, 2, 3, 4, 5].map(|i| pct(xs[i].1, bs[i].1))
    };
    DeltaReport {
        baseline: baseline.to_owned(),
        schema: s,
        call: c,
        result: r,
        prompt: p,
        completion: k,
        total: t,
    }
}
