//! A scripted tool-calling loop.
//!
//! Formats are substituted at three points: the tool catalog in the system
//! prompt, the calls the model writes, and the tool results fed back. The
//! executor always receives minimal JSON arguments, whatever the model
//! wrote. Every piece of text that enters or leaves the model is recorded
//! as an origin-tagged span so the token meter can decompose the run.

mod envelope;
mod executor;
mod prompt;
mod script;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use envelope::{parse_envelope, preprocess, Envelope, ParseFailure, ParsedEnvelope, Stage};
pub use executor::{FixtureError, TableExecutor, ToolExecutor};
pub use prompt::{
    build_system_prompt, check_catalog, decode_schema_block, load_catalog, serialize_catalog, CatalogError,
    SystemPrompt, ToolSchema, SCHEMA_SEPARATOR,
};
pub use script::{parse_trace, AgentModel, AgentRequest, Mutator, ScriptBody, ScriptTurn, ScriptedAgent, TraceError};

use crate::format::Format;
use crate::json::{decode_json, encode_json, JsonStyle};
use crate::meter::{Channel, Origin, Span};

pub const DEFAULT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// The model reads the target format but writes JSON.
    #[default]
    InputOnly,
    /// The model reads and writes the target format.
    Full,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input-only" | "input_only" | "input" => Ok(Mode::InputOnly),
            "full" => Ok(Mode::Full),
            other => Err(format!("unknown mode {other:?} (expected input-only or full)")),
        }
    }
}

/// Which turns get corrupted. A turn is corrupted when its iteration index
/// is listed in `at`, or when a seeded draw falls below `rate`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FailureInjection {
    pub rate: f64,
    pub seed: u64,
    pub at: Vec<usize>,
    /// Fixed mutator; otherwise one is drawn per corrupted turn.
    pub mutator: Option<Mutator>,
}

impl FailureInjection {
    pub fn none() -> Self {
        FailureInjection::default()
    }

    pub fn at(iterations: impl IntoIterator<Item = usize>, mutator: Mutator) -> Self {
        FailureInjection {
            at: iterations.into_iter().collect(),
            mutator: Some(mutator),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub format: Format,
    pub mode: Mode,
    pub max_iterations: usize,
    pub failure: FailureInjection,
    pub tron_batching: bool,
}

impl LoopConfig {
    pub fn new(format: Format, mode: Mode) -> Self {
        LoopConfig {
            format,
            mode,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            failure: FailureInjection::none(),
            tron_batching: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurnOutcome {
    Parsed(Envelope),
    ParseError(ParseFailure),
    /// The reply parsed but named a tool outside the catalog.
    UnknownTool(String),
}

impl TurnOutcome {
    pub fn is_error(&self) -> bool {
        !matches!(self, TurnOutcome::Parsed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub index: usize,
    /// The reply as the loop received it (after any injected corruption).
    pub raw: String,
    pub injected: Option<Mutator>,
    pub think_stripped: bool,
    pub fence_extracted: bool,
    pub outcome: TurnOutcome,
    /// Minimal JSON handed to the executor, for successful steps.
    pub executor_arguments: Option<String>,
    /// Prompt text added before the reply, the reply, then the observation.
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum TerminalStatus {
    FinalAnswer(String),
    #[default]
    IterationCap,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub format: Format,
    pub mode: Mode,
    pub turns: Vec<Turn>,
    /// Rejected turns that were followed by another attempt.
    pub cascade_count: usize,
    pub status: TerminalStatus,
}

impl TrajectoryRecord {
    pub fn iterations(&self) -> usize {
        self.turns.len()
    }

    pub fn calls(&self) -> usize {
        self.turns.iter().filter(|t| t.executor_arguments.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trajectory aborted: no fixture result for {tool} with arguments {arguments}")]
pub struct AbortedTrajectory {
    pub tool: String,
    pub arguments: String,
    pub record: TrajectoryRecord,
}

/// The plain-text observation appended after a rejected reply.
pub fn format_error_observation(stage: Stage, output: Format) -> String {
    format!(
        "Format error ({stage} stage). Reply with exactly one {} document: keys thought, action and \
         arguments, or the single key final_answer.",
        output.label()
    )
}

pub fn unknown_tool_observation(name: &str, catalog: &[ToolSchema]) -> String {
    let names: Vec<&str> = catalog.iter().map(|t| t.name.as_str()).collect();
    format!("Unknown tool {name:?}. Available tools: {}.", names.join(", "))
}

pub fn run_trajectory(
    task: &str,
    agent: &mut dyn AgentModel,
    executor: &mut dyn ToolExecutor,
    catalog: &[ToolSchema],
    cfg: &LoopConfig,
) -> Result<TrajectoryRecord, AbortedTrajectory> {
    let output = cfg.output_format();
    let system = build_system_prompt(catalog, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.failure.seed);
    let mut record = TrajectoryRecord {
        format: cfg.format,
        mode: cfg.mode,
        ..Default::default()
    };
    let mut observation: Option<String> = None;
    let mut retry = false;

    for iteration in 0..cfg.max_iterations.max(1) {
        let mut spans = Vec::new();
        if iteration == 0 {
            for (origin, text) in &system.sections {
                spans.push(Span::new(*origin, Channel::Prompt, text.clone()));
            }
            spans.push(Span::new(Origin::Other, Channel::Prompt, format!("\n\nTask: {task}")));
        }

        let mut raw = agent.respond(&AgentRequest {
            iteration,
            output_format: output,
            retry,
            observation: observation.as_deref(),
        });
        let draw: f64 = rng.gen();
        let pick = rng.gen_range(0..Mutator::ALL.len());
        let injected = (cfg.failure.at.contains(&iteration) || draw < cfg.failure.rate)
            .then(|| cfg.failure.mutator.unwrap_or(Mutator::ALL[pick]));
        if let Some(m) = injected {
            raw = m.apply(&raw, output);
        }

        let mut turn = Turn {
            index: iteration,
            raw: raw.clone(),
            injected,
            think_stripped: false,
            fence_extracted: false,
            outcome: TurnOutcome::ParseError(ParseFailure {
                stage: Stage::Decode,
                detail: String::new(),
            }),
            executor_arguments: None,
            spans,
        };

        let next_observation = match parse_envelope(&raw, output) {
            Err(failure) => {
                turn.spans
                    .push(Span::new(Origin::Other, Channel::Completion, raw.clone()));
                let text = format_error_observation(failure.stage, output);
                turn.outcome = TurnOutcome::ParseError(failure);
                Some((Origin::Other, text))
            }
            Ok(parsed) => {
                turn.think_stripped = parsed.think_stripped;
                turn.fence_extracted = parsed.fence_extracted;
                let doc_origin = match parsed.envelope {
                    Envelope::Step { .. } => Origin::Call,
                    Envelope::Final { .. } => Origin::Other,
                };
                let (head, rest) = raw.split_at(parsed.document.start);
                let (doc, tail) = rest.split_at(parsed.document.len());
                for (origin, text) in [(Origin::Other, head), (doc_origin, doc), (Origin::Other, tail)] {
                    if !text.is_empty() {
                        turn.spans.push(Span::new(origin, Channel::Completion, text));
                    }
                }
                match parsed.envelope.clone() {
                    Envelope::Final { answer } => {
                        turn.outcome = TurnOutcome::Parsed(parsed.envelope);
                        record.turns.push(turn);
                        record.status = TerminalStatus::FinalAnswer(answer);
                        finish(&mut record);
                        return Ok(record);
                    }
                    Envelope::Step { action, .. } if !catalog.iter().any(|t| t.name == action) => {
                        turn.outcome = TurnOutcome::UnknownTool(action.clone());
                        Some((Origin::Other, unknown_tool_observation(&action, catalog)))
                    }
                    Envelope::Step { action, arguments, .. } => {
                        let args_json = encode_json(&arguments, JsonStyle::Minimal);
                        debug_assert_eq!(decode_json(&args_json).as_ref(), Ok(&arguments));
                        turn.outcome = TurnOutcome::Parsed(parsed.envelope);
                        turn.executor_arguments = Some(args_json.clone());
                        match executor.call(&action, &args_json) {
                            Some(result) => Some((Origin::Result, cfg.format.encode(&result))),
                            None => {
                                record.turns.push(turn);
                                record.status = TerminalStatus::Aborted;
                                finish(&mut record);
                                return Err(AbortedTrajectory {
                                    tool: action,
                                    arguments: args_json,
                                    record,
                                });
                            }
                        }
                    }
                }
            }
        };

        retry = turn.outcome.is_error();
        observation = next_observation.map(|(origin, text)| {
            turn.spans.push(Span::new(Origin::Other, Channel::Prompt, "\n\n"));
            turn.spans.push(Span::new(origin, Channel::Prompt, text.clone()));
            text
        });
        record.turns.push(turn);
    }
    record.status = TerminalStatus::IterationCap;
    finish(&mut record);
    Ok(record)
}

fn finish(record: &mut TrajectoryRecord) {
    let n = record.turns.len();
    record.cascade_count = record
        .turns
        .iter()
        .enumerate()
        .filter(|(i, t)| t.outcome.is_error() && i + 1 < n)
        .count();
}
