use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use notation_bench::{
    convert, load_tokenizer, measure, parse_mutator, read_corpus, read_file, replay, report_json, roundtrip,
    write_file, CliError, CliResult, ExitKind, Profile, ReplayOptions,
};
use notation_core::agent::{FailureInjection, Mode, Mutator, DEFAULT_MAX_ITERATIONS};
use notation_core::{Format, Value};

/// Convert, measure and replay documents in JSON, TOON and TRON.
#[derive(Debug, Parser)]
#[command(name = "notation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Re-encode a document from one format to another.
    Convert(ConvertArgs),
    /// Token and byte deltas of a JSON corpus against minimal JSON.
    Measure(MeasureArgs),
    /// Replay scripted trajectories and compare them with a JSON run.
    Replay(ReplayArgs),
    /// Check that generated documents survive every codec.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args)]
struct TokenizerArgs {
    /// bytes, words or bpe.
    #[arg(long, default_value = "bytes")]
    tokenizer: String,
    /// Directory holding vocab.json and merges.txt (for --tokenizer bpe).
    #[arg(long, value_name = "DIR")]
    vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Input file; standard input when absent or `-`.
    input: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    from: Format,
    #[arg(long, env = "NOTATION_FORMAT", default_value = "json")]
    to: Format,
    /// Indented JSON output.
    #[arg(long)]
    pretty: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    corpus: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    /// Measure TRON as one batch document over the whole corpus.
    #[arg(long)]
    batch: bool,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Trace files (line-delimited turn records).
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    executor: PathBuf,
    #[arg(long, env = "NOTATION_FORMAT", default_value = "toon")]
    format: Format,
    /// input-only or full.
    #[arg(long, default_value = "input-only")]
    mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    failure_rate: f64,
    /// Comma-separated iterations to corrupt regardless of the rate.
    #[arg(long, value_delimiter = ',')]
    fail_at: Vec<usize>,
    /// truncate, swap-delimiter or rename-key; drawn per turn when absent.
    #[arg(long, value_parser = parse_mutator)]
    mutator: Option<Mutator>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Serialize TRON schemas one document each.
    #[arg(long)]
    no_batch: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    #[arg(long, default_value = "Solve the user's request with the available tools.")]
    task: String,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    count: u64,
    /// default, delimiter, tabular, scalar or mixed.
    #[arg(long, default_value = "mixed")]
    profile: Profile,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(ExitKind::Usage.code()),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert(a) => cmd_convert(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
    }
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, &format!("{text}\n")),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")
                .context("writing standard output")
                .map_err(|e| CliError::new(ExitKind::Io, e))
        }
    }
}

fn cmd_convert(a: ConvertArgs) -> CliResult<()> {
    let text = match a.input.as_deref() {
        Some(path) if path != Path::new("-") => read_file(path)?,
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .context("reading standard input")
                .map_err(|e| CliError::new(ExitKind::Io, e))?;
            s
        }
    };
    emit(&convert(&text, a.from, a.to, a.pretty)?, a.out.as_deref())
}

fn write_report(out: Option<&Path>, report: &Value) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, &format!("{}\n", report_json(report))),
        None => Ok(()),
    }
}

fn cmd_measure(a: MeasureArgs) -> CliResult<()> {
    let tok = load_tokenizer(&a.tokenizer.tokenizer, a.tokenizer.vocab.as_deref())?;
    let report = measure(&read_corpus(&a.corpus)?, &tok, a.batch)?;
    write_report(a.out.as_deref(), &report.to_value())?;
    emit(&report.render(), None)
}

fn cmd_replay(a: ReplayArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.failure_rate) {
        return Err(CliError::usage("--failure-rate must be within [0, 1]"));
    }
    if a.max_iterations == 0 {
        return Err(CliError::usage("--max-iterations must be at least 1"));
    }
    let tok = load_tokenizer(&a.tokenizer.tokenizer, a.tokenizer.vocab.as_deref())?;
    let traces = a
        .traces
        .iter()
        .map(|p| Ok((p.display().to_string(), read_file(p)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let opts = ReplayOptions {
        format: a.format,
        mode: a.mode,
        failure: FailureInjection {
            rate: a.failure_rate,
            seed: a.seed,
            at: a.fail_at,
            mutator: a.mutator,
        },
        tron_batching: !a.no_batch,
        max_iterations: a.max_iterations,
        task: a.task,
    };
    let report = replay(&traces, &read_file(&a.catalog)?, &read_file(&a.executor)?, &opts, &tok)?;
    write_report(a.out.as_deref(), &report.to_value())?;
    emit(&report.render(), None)
}

fn cmd_roundtrip(a: RoundtripArgs) -> CliResult<()> {
    let summary = roundtrip(a.seed, a.count, a.profile)?;
    match summary.failure {
        None => emit(
            &format!("roundtrip: {} documents, all formats: pass", summary.checked),
            None,
        ),
        Some(c) => Err(CliError::new(
            ExitKind::Property,
            anyhow::anyhow!("{} round-trip failed for seed {}: {}", c.format, c.seed, c.json),
        )),
    }
}
