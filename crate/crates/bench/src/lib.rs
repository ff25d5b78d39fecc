//! Conversion, corpus measurement, trajectory replay and round-trip checks
//! behind the `notation` binary. Every command returns a value that renders
//! both as a text table and as a JSON report built from the same numbers.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use notation_core::agent::{
    load_catalog, parse_trace, run_trajectory, FailureInjection, LoopConfig, Mode, Mutator, ScriptedAgent,
    TableExecutor, TerminalStatus, TrajectoryRecord,
};
use notation_core::meter::round_tenth;
use notation_core::{
    decompose, delta_vs_baseline, encode_json, encode_toon, encode_tron, encode_tron_batch, equals, generate,
    DeltaReport, Format, GenProfile, JsonStyle, Percent, TokenBreakdown, Tokenizer, ToonGrammarConfig, Value,
    VocabLoadError,
};

/// Stable process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Property,
    Decode,
    Io,
    Usage,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Property => 1,
            ExitKind::Decode => 2,
            ExitKind::Io => 3,
            ExitKind::Usage => 64,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::new(ExitKind::Usage, anyhow!("{msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Keeps only the top-level message of errors whose display already
/// includes their source.
fn flat(e: impl fmt::Display) -> anyhow::Error {
    anyhow!("{e}")
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| CliError::new(ExitKind::Io, e))
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| CliError::new(ExitKind::Io, e))
}

/// Loads `vocab.json` and `merges.txt` from `dir` for `kind == "bpe"`.
pub fn load_tokenizer(kind: &str, vocab_dir: Option<&Path>) -> CliResult<Tokenizer> {
    match kind {
        "bytes" => Ok(Tokenizer::ByteCount),
        "words" => Ok(Tokenizer::WordRegex),
        "bpe" => {
            let dir = vocab_dir.ok_or_else(|| CliError::usage("--tokenizer bpe requires --vocab DIR"))?;
            let vocab =
                notation_core::BpeVocab::load(&dir.join("vocab.json"), &dir.join("merges.txt")).map_err(|e| {
                    let kind = match e {
                        VocabLoadError::Io { .. } => ExitKind::Io,
                        _ => ExitKind::Decode,
                    };
                    CliError::new(kind, flat(e))
                })?;
            Ok(Tokenizer::Bpe(vocab))
        }
        other => Err(CliError::usage(format!(
            "unknown tokenizer {other:?} (expected bytes, words or bpe)"
        ))),
    }
}

/// Decodes `text` as `from` and re-encodes it as `to`. JSON output is
/// minimal unless `pretty` is set.
pub fn convert(text: &str, from: Format, to: Format, pretty: bool) -> CliResult<String> {
    let value = from
        .decode(text)
        .map_err(|e| CliError::new(ExitKind::Decode, flat(e)))?;
    Ok(match (to, pretty) {
        (Format::Json, true) => encode_json(&value, JsonStyle::Pretty { indent_width: 2 }),
        _ => to.encode(&value),
    })
}

fn pct_value(p: Percent) -> Value {
    match p.0 {
        Some(x) => Value::number(&format!("{x:.1}")),
        None => Value::Null,
    }
}

fn count_value(n: usize) -> Value {
    Value::from(n as i64)
}

fn mean_percent(values: impl IntoIterator<Item = Percent>) -> Percent {
    let xs: Vec<f64> = values.into_iter().filter_map(|p| p.0).collect();
    if xs.is_empty() {
        return Percent(None);
    }
    Percent(Some(round_tenth(xs.iter().sum::<f64>() / xs.len() as f64)))
}

/// Renders rows as left-aligned first column and right-aligned numbers.
fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_owned()
    };
    let mut out = vec![line(header.iter().map(|h| h.to_string()).collect())];
    out.push(line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    out.extend(rows.iter().map(|r| line(r.clone())));
    out.join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Size {
    pub bytes: usize,
    pub tokens: usize,
}

impl Size {
    fn of(text: &str, tok: &Tokenizer) -> Size {
        Size {
            bytes: text.len(),
            tokens: tok.count(text),
        }
    }

    fn to_value(self) -> Value {
        Value::object([("bytes", count_value(self.bytes)), ("tokens", count_value(self.tokens))])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileRow {
    pub path: String,
    pub json: Size,
    pub toon: Size,
    pub tron: Size,
    pub toon_delta: Percent,
    pub tron_delta: Percent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub tokenizer: String,
    /// TRON aggregate measured as one batch document over the corpus.
    pub batch: bool,
    pub rows: Vec<FileRow>,
    /// Mean of per-file percentages; TRON is n/a when batched.
    pub mean_of_percentages: (Percent, Percent),
    pub absolute_sum: AbsoluteSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsoluteSum {
    pub json_tokens: usize,
    pub toon_tokens: usize,
    pub tron_tokens: usize,
    pub toon_delta: Percent,
    pub tron_delta: Percent,
}

pub const MEAN_LABEL: &str = "mean-of-percentages";
pub const SUM_LABEL: &str = "absolute-sum";

/// Measures `(path, json text)` pairs. Any undecodable file fails the whole
/// report.
pub fn measure(files: &[(String, String)], tok: &Tokenizer, batch: bool) -> CliResult<CorpusReport> {
    let cfg = ToonGrammarConfig::default();
    let mut values = Vec::with_capacity(files.len());
    let mut rows = Vec::with_capacity(files.len());
    for (path, text) in files {
        let v = notation_core::decode_json(text)
            .with_context(|| format!("decoding {path}"))
            .map_err(|e| CliError::new(ExitKind::Decode, e))?;
        let json = Size::of(&encode_json(&v, JsonStyle::Minimal), tok);
        let toon = Size::of(&encode_toon(&v, &cfg), tok);
        let tron = Size::of(&encode_tron(&v), tok);
        rows.push(FileRow {
            path: path.clone(),
            json,
            toon,
            tron,
            toon_delta: Percent::change(toon.tokens as f64, json.tokens as f64),
            tron_delta: Percent::change(tron.tokens as f64, json.tokens as f64),
        });
        values.push(v);
    }
    let json_tokens: usize = rows.iter().map(|r| r.json.tokens).sum();
    let toon_tokens: usize = rows.iter().map(|r| r.toon.tokens).sum();
    let tron_tokens = if batch && !values.is_empty() {
        tok.count(&encode_tron_batch(&values))
    } else {
        rows.iter().map(|r| r.tron.tokens).sum()
    };
    let mean_toon = mean_percent(rows.iter().map(|r| r.toon_delta));
    let mean_tron = if batch {
        Percent(None)
    } else {
        mean_percent(rows.iter().map(|r| r.tron_delta))
    };
    Ok(CorpusReport {
        tokenizer: tok.name().to_owned(),
        batch,
        rows,
        mean_of_percentages: (mean_toon, mean_tron),
        absolute_sum: AbsoluteSum {
            json_tokens,
            toon_tokens,
            tron_tokens,
            toon_delta: Percent::change(toon_tokens as f64, json_tokens as f64),
            tron_delta: Percent::change(tron_tokens as f64, json_tokens as f64),
        },
    })
}

/// Reads every `*.json` file directly inside `dir`, sorted by path.
pub fn read_corpus(dir: &Path) -> CliResult<Vec<(String, String)>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))
        .map_err(|e| CliError::new(ExitKind::Io, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::new(ExitKind::Io, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("{} contains no .json files", dir.display())));
    }
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read_file(p)?)))
        .collect()
}

impl CorpusReport {
    pub fn to_value(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Value::object([
                    ("path", Value::text(r.path.as_str())),
                    ("json", r.json.to_value()),
                    ("toon", r.toon.to_value()),
                    ("tron", r.tron.to_value()),
                    ("toon_delta_pct", pct_value(r.toon_delta)),
                    ("tron_delta_pct", pct_value(r.tron_delta)),
                ])
            })
            .collect();
        let s = &self.absolute_sum;
        Value::object([
            ("tokenizer", Value::text(self.tokenizer.as_str())),
            ("baseline", Value::text("json")),
            ("tron_batched", Value::Bool(self.batch)),
            ("files", Value::Array(rows)),
            (
                "aggregates",
                Value::Array(vec![
                    Value::object([
                        ("label", Value::text(MEAN_LABEL)),
                        ("toon_delta_pct", pct_value(self.mean_of_percentages.0)),
                        ("tron_delta_pct", pct_value(self.mean_of_percentages.1)),
                    ]),
                    Value::object([
                        ("label", Value::text(SUM_LABEL)),
                        ("json_tokens", count_value(s.json_tokens)),
                        ("toon_tokens", count_value(s.toon_tokens)),
                        ("tron_tokens", count_value(s.tron_tokens)),
                        ("toon_delta_pct", pct_value(s.toon_delta)),
                        ("tron_delta_pct", pct_value(s.tron_delta)),
                    ]),
                ]),
            ),
        ])
    }

    pub fn render(&self) -> String {
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.path.clone(),
                    r.json.tokens.to_string(),
                    r.toon.tokens.to_string(),
                    r.tron.tokens.to_string(),
                    r.toon_delta.to_string(),
                    r.tron_delta.to_string(),
                ]
            })
            .collect();
        let (mt, mr) = self.mean_of_percentages;
        rows.push(vec![
            MEAN_LABEL.into(),
            String::new(),
            String::new(),
            String::new(),
            mt.to_string(),
            mr.to_string(),
        ]);
        let s = &self.absolute_sum;
        let sum_label = if self.batch {
            format!("{SUM_LABEL} (tron batched)")
        } else {
            SUM_LABEL.to_owned()
        };
        rows.push(vec![
            sum_label,
            s.json_tokens.to_string(),
            s.toon_tokens.to_string(),
            s.tron_tokens.to_string(),
            s.toon_delta.to_string(),
            s.tron_delta.to_string(),
        ]);
        let table = render_table(&["file", "json", "toon", "tron", "toon vs json", "tron vs json"], &rows);
        format!("tokenizer: {}\n{table}", self.tokenizer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    pub format: Format,
    pub mode: Mode,
    pub failure: FailureInjection,
    pub tron_batching: bool,
    pub max_iterations: usize,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub format: Format,
    pub mode: Mode,
    pub iterations: usize,
    pub calls: usize,
    pub cascade_count: usize,
    pub status: String,
    pub breakdown: TokenBreakdown,
}

impl RunSummary {
    pub fn of(record: &TrajectoryRecord, tok: &Tokenizer) -> CliResult<RunSummary> {
        let breakdown = decompose(record, tok).map_err(|e| CliError::new(ExitKind::Decode, e))?;
        let status = match &record.status {
            TerminalStatus::FinalAnswer(_) => "final-answer",
            TerminalStatus::IterationCap => "iteration-cap",
            TerminalStatus::Aborted => "aborted",
        };
        Ok(RunSummary {
            format: record.format,
            mode: record.mode,
            iterations: record.iterations(),
            calls: record.calls(),
            cascade_count: record.cascade_count,
            status: status.to_owned(),
            breakdown,
        })
    }

    fn to_value(&self) -> Value {
        let b = &self.breakdown;
        Value::object([
            ("format", Value::text(self.format.name())),
            ("mode", Value::text(mode_name(self.mode))),
            ("iterations", count_value(self.iterations)),
            ("calls", count_value(self.calls)),
            ("cascade_count", count_value(self.cascade_count)),
            ("status", Value::text(self.status.as_str())),
            (
                "tokens",
                Value::object([
                    ("schema", count_value(b.schema_tokens)),
                    ("call", count_value(b.call_tokens)),
                    ("result", count_value(b.result_tokens)),
                    ("prompt", count_value(b.prompt_tokens)),
                    ("completion", count_value(b.completion_tokens)),
                    ("total", count_value(b.total)),
                ]),
            ),
        ])
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::InputOnly => "input-only",
        Mode::Full => "full",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRow {
    pub trace: String,
    pub target: RunSummary,
    pub reference: RunSummary,
    pub delta: DeltaReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub tokenizer: String,
    pub rows: Vec<ReplayRow>,
    /// Per-component mean of the per-trace percentages.
    pub mean_of_percentages: DeltaReport,
    /// Delta of the summed breakdowns.
    pub absolute_sum: DeltaReport,
}

fn sum_breakdowns<'a>(it: impl Iterator<Item = &'a TokenBreakdown>) -> TokenBreakdown {
    it.fold(TokenBreakdown::default(), |a, b| TokenBreakdown {
        schema_tokens: a.schema_tokens + b.schema_tokens,
        call_tokens: a.call_tokens + b.call_tokens,
        result_tokens: a.result_tokens + b.result_tokens,
        prompt_tokens: a.prompt_tokens + b.prompt_tokens,
        completion_tokens: a.completion_tokens + b.completion_tokens,
        total: a.total + b.total,
    })
}

fn fixture_error(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(ExitKind::Decode, e)
}

/// Replays each trace in the target configuration and against a clean
/// JSON reference run with the same script, catalog and executor table.
pub fn replay(
    traces: &[(String, String)],
    catalog_text: &str,
    executor_text: &str,
    opts: &ReplayOptions,
    tok: &Tokenizer,
) -> CliResult<ReplayReport> {
    if traces.is_empty() {
        return Err(CliError::usage("at least one trace is required"));
    }
    let catalog = load_catalog(catalog_text).map_err(fixture_error)?;
    let executor = TableExecutor::from_json(executor_text).map_err(fixture_error)?;
    let target_cfg = LoopConfig {
        max_iterations: opts.max_iterations,
        failure: opts.failure.clone(),
        tron_batching: opts.tron_batching,
        ..LoopConfig::new(opts.format, opts.mode)
    };
    let reference_cfg = LoopConfig {
        max_iterations: opts.max_iterations,
        failure: FailureInjection {
            seed: opts.failure.seed,
            ..FailureInjection::none()
        },
        ..LoopConfig::new(Format::Json, Mode::InputOnly)
    };
    let mut rows = Vec::with_capacity(traces.len());
    for (name, text) in traces {
        let script = parse_trace(text).with_context(|| name.clone()).map_err(fixture_error)?;
        let run = |cfg: &LoopConfig| -> CliResult<RunSummary> {
            let mut agent = ScriptedAgent::new(script.clone());
            let mut exec = executor.clone();
            let record = run_trajectory(&opts.task, &mut agent, &mut exec, &catalog, cfg)
                .with_context(|| name.clone())
                .map_err(fixture_error)?;
            RunSummary::of(&record, tok)
        };
        let target = run(&target_cfg)?;
        let reference = run(&reference_cfg)?;
        let delta = delta_vs_baseline(&target.breakdown, &reference.breakdown, "json");
        rows.push(ReplayRow {
            trace: name.clone(),
            target,
            reference,
            delta,
        });
    }
    let mean = |f: fn(&DeltaReport) -> Percent| mean_percent(rows.iter().map(|r| f(&r.delta)));
    let mean_of_percentages = DeltaReport {
        baseline: "json".into(),
        schema: mean(|d| d.schema),
        call: mean(|d| d.call),
        result: mean(|d| d.result),
        prompt: mean(|d| d.prompt),
        completion: mean(|d| d.completion),
        total: mean(|d| d.total),
    };
    let absolute_sum = delta_vs_baseline(
        &sum_breakdowns(rows.iter().map(|r| &r.target.breakdown)),
        &sum_breakdowns(rows.iter().map(|r| &r.reference.breakdown)),
        "json",
    );
    Ok(ReplayReport {
        tokenizer: tok.name().to_owned(),
        rows,
        mean_of_percentages,
        absolute_sum,
    })
}

fn delta_value(label: Option<&str>, d: &DeltaReport) -> Value {
    let mut pairs: Vec<(String, Value)> = label
        .map(|l| ("label".to_owned(), Value::text(l)))
        .into_iter()
        .collect();
    pairs.push(("baseline".to_owned(), Value::text(d.baseline.as_str())));
    pairs.extend(d.rows().iter().map(|(k, p)| (format!("{k}_pct"), pct_value(*p))));
    Value::object(pairs)
}

impl ReplayReport {
    pub fn to_value(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Value::object([
                    ("trace", Value::text(r.trace.as_str())),
                    ("target", r.target.to_value()),
                    ("reference", r.reference.to_value()),
                    ("delta", delta_value(None, &r.delta)),
                ])
            })
            .collect();
        Value::object([
            ("tokenizer", Value::text(self.tokenizer.as_str())),
            ("traces", Value::Array(rows)),
            (
                "aggregates",
                Value::Array(vec![
                    delta_value(Some(MEAN_LABEL), &self.mean_of_percentages),
                    delta_value(Some(SUM_LABEL), &self.absolute_sum),
                ]),
            ),
        ])
    }

    pub fn render(&self) -> String {
        let mut out = vec![format!("tokenizer: {}", self.tokenizer)];
        let header = [
            "",
            "iterations",
            "calls",
            "cascade",
            "schema",
            "call",
            "result",
            "prompt",
            "completion",
            "total",
        ];
        for r in &self.rows {
            let run_row = |label: String, s: &RunSummary| {
                let b = &s.breakdown;
                vec![
                    label,
                    s.iterations.to_string(),
                    s.calls.to_string(),
                    s.cascade_count.to_string(),
                    b.schema_tokens.to_string(),
                    b.call_tokens.to_string(),
                    b.result_tokens.to_string(),
                    b.prompt_tokens.to_string(),
                    b.completion_tokens.to_string(),
                    b.total.to_string(),
                ]
            };
            let target_label = format!("{} {}", r.target.format.name(), mode_name(r.target.mode));
            let mut delta_row = vec!["delta vs json".to_owned(), String::new(), String::new(), String::new()];
            delta_row.extend(r.delta.rows().iter().map(|(_, p)| p.to_string()));
            let rows = vec![
                run_row(target_label, &r.target),
                run_row("json reference".into(), &r.reference),
                delta_row,
            ];
            out.push(String::new());
            out.push(format!("trace: {} ({})", r.trace, r.target.status));
            out.push(render_table(&header, &rows));
        }
        let agg = |label: &str, d: &DeltaReport| {
            let mut row = vec![label.to_owned()];
            row.extend(d.rows().iter().map(|(_, p)| p.to_string()));
            row
        };
        out.push(String::new());
        out.push(render_table(
            &["aggregate", "schema", "call", "result", "prompt", "completion", "total"],
            &[
                agg(MEAN_LABEL, &self.mean_of_percentages),
                agg(SUM_LABEL, &self.absolute_sum),
            ],
        ));
        out.join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Default,
    Delimiter,
    Tabular,
    Scalar,
    /// Alternates default and delimiter-heavy documents.
    Mixed,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Profile::Default),
            "delimiter" => Ok(Profile::Delimiter),
            "tabular" => Ok(Profile::Tabular),
            "scalar" => Ok(Profile::Scalar),
            "mixed" => Ok(Profile::Mixed),
            other => Err(format!("unknown profile {other:?}")),
        }
    }
}

impl Profile {
    fn for_index(self, i: u64) -> GenProfile {
        match self {
            Profile::Default => GenProfile::default(),
            Profile::Delimiter => GenProfile::delimiter_heavy(),
            Profile::Tabular => GenProfile::tabular(),
            Profile::Scalar => GenProfile::scalar(),
            Profile::Mixed if i.is_multiple_of(2) => GenProfile::default(),
            Profile::Mixed => GenProfile::delimiter_heavy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub seed: u64,
    pub format: Format,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripSummary {
    pub checked: u64,
    pub failure: Option<Counterexample>,
}

/// Checks documents generated from seeds `seed..seed + count` through every
/// codec, stopping at the first counterexample.
pub fn roundtrip(seed: u64, count: u64, profile: Profile) -> CliResult<RoundtripSummary> {
    if count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let v = generate(s, &profile.for_index(i));
        for format in Format::ALL {
            let ok = format
                .decode(&format.encode(&v))
                .is_ok_and(|back| equals(&back, &v, true));
            if !ok {
                return Ok(RoundtripSummary {
                    checked: i + 1,
                    failure: Some(Counterexample {
                        seed: s,
                        format,
                        json: encode_json(&v, JsonStyle::Minimal),
                    }),
                });
            }
        }
    }
    Ok(RoundtripSummary {
        checked: count,
        failure: None,
    })
}

pub fn parse_mutator(s: &str) -> Result<Mutator, String> {
    Mutator::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown mutator {s:?} (expected truncate, swap-delimiter or rename-key)"))
}

pub fn report_json(v: &Value) -> String {
    encode_json(v, JsonStyle::Pretty { indent_width: 2 })
}
