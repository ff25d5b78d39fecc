//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use notation_bench::{measure, replay, ReplayOptions, MEAN_LABEL, SUM_LABEL};
use notation_core::agent::{
    build_system_prompt, format_error_observation, load_catalog, parse_envelope, parse_trace, run_trajectory, Envelope,
    FailureInjection, LoopConfig, Mode, Mutator, ScriptBody, ScriptTurn, ScriptedAgent, Stage, TableExecutor,
    ToolExecutor, ToolSchema, TrajectoryRecord, DEFAULT_MAX_ITERATIONS,
};
use notation_core::{
    decode_json, decode_toon, decode_tron, decompose, delta_vs_baseline, encode_json, encode_toon, encode_tron,
    encode_tron_batch, encode_tron_with, equals, extract_classes, generate, Format, GenProfile, JsonStyle, Percent,
    Tokenizer, ToonGrammarConfig, TronOptions, Value,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(name: &str) -> String {
    let path = fixtures().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn minimal(v: &Value) -> String {
    encode_json(v, JsonStyle::Minimal)
}

fn hike(id: i64, name: &str, km: &str) -> Value {
    Value::object([
        ("id", id.into()),
        ("name", name.into()),
        ("distanceKm", Value::number(km)),
    ])
}

fn sample() -> Value {
    Value::object([
        (
            "context",
            Value::object([
                ("task", "Our favorite hikes".into()),
                ("location", "Boulder".into()),
                ("season", "spring_2025".into()),
            ]),
        ),
        ("friends", Value::Array(vec!["ana".into(), "luis".into(), "sam".into()])),
        (
            "hikes",
            Value::Array(vec![
                hike(1, "Blue Lake Trail", "7.5"),
                hike(2, "Ridge Overlook", "9.2"),
                hike(3, "Wildflower Loop", "5.1"),
            ]),
        ),
    ])
}

/// Joins a display-wrapped TRON body: a break inside a string literal stood
/// for a space, a break elsewhere for nothing.
fn unwrap_tron_display(text: &str) -> String {
    let (header, body) = text.split_once("\n\n").expect("class block");
    let mut out = String::new();
    let (mut in_str, mut esc) = (false, false);
    for c in body.trim_end().chars() {
        if c == '\n' {
            if in_str {
                out.push(' ');
            }
            continue;
        }
        if in_str {
            match c {
                _ if esc => esc = false,
                '\\' => esc = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        }
        out.push(c);
    }
    format!("{header}\n\n{out}")
}

fn golden_fidelity() -> Outcome {
    let cfg = ToonGrammarConfig::default();
    let v = sample();
    let toon_listing = read("figure3.toon").trim_end_matches('\n').to_owned();
    let tron_listing = unwrap_tron_display(&read("figure3.tron"));
    ensure!(
        decode_json(&read("figure3.json")).ok() == Some(v.clone()),
        "JSON listing does not decode to the sample"
    );
    let toon = encode_toon(&v, &cfg);
    ensure!(toon == toon_listing, "TOON differs:\n{toon}\n---\n{toon_listing}");
    let tron = encode_tron(&v);
    ensure!(tron == tron_listing, "TRON differs:\n{tron}\n---\n{tron_listing}");
    ensure!(
        decode_toon(&toon, &cfg).ok() == Some(v.clone()),
        "TOON listing does not decode to the sample"
    );
    ensure!(
        decode_tron(&tron).ok() == Some(v),
        "TRON listing does not decode to the sample"
    );
    Ok(format!(
        "toon {} bytes, tron {} bytes, byte-exact",
        toon.len(),
        tron.len()
    ))
}

fn roundtrip_property() -> Outcome {
    let cfg = ToonGrammarConfig::default();
    let profiles = [
        GenProfile::default(),
        GenProfile::delimiter_heavy(),
        GenProfile::tabular(),
    ];
    let mut passed = 0;
    for seed in 0..10_000u64 {
        let v = generate(seed, &profiles[(seed % 3) as usize]);
        let json = decode_json(&minimal(&v)).map_err(|e| format!("seed {seed}: json {e}"))?;
        let toon = decode_toon(&encode_toon(&v, &cfg), &cfg).map_err(|e| format!("seed {seed}: toon {e}"))?;
        let tron = decode_tron(&encode_tron(&v)).map_err(|e| format!("seed {seed}: tron {e}"))?;
        for (name, back) in [("json", json), ("toon", toon), ("tron", tron)] {
            ensure!(equals(&back, &v, true), "seed {seed}: {name} changed {}", minimal(&v));
        }
        passed += 1;
    }
    Ok(format!(
        "{passed}/10000 documents, 3 codecs, profiles default/delimiter/tabular"
    ))
}

fn catalog() -> Vec<ToolSchema> {
    load_catalog(&read("replay/catalog.json")).expect("catalog fixture")
}

fn batching_condition() -> Outcome {
    let values: Vec<Value> = catalog().iter().map(ToolSchema::to_value).collect();
    ensure!(values.len() == 5, "expected 5 schemas");
    let batched = encode_tron_batch(&values).len();
    let individual: usize = values.iter().map(|v| encode_tron(v).len()).sum();
    let json_array = minimal(&Value::Array(values.clone())).len();
    let json_each: usize = values.iter().map(|v| minimal(v).len()).sum();
    ensure!(batched < individual, "batched {batched} >= individual {individual}");
    ensure!(batched < json_array, "batched {batched} >= json {json_array}");
    ensure!(batched < json_each, "batched {batched} >= json documents {json_each}");
    Ok(format!(
        "batched {batched} < individual {individual}, json {json_array}"
    ))
}

/// Flat objects with one to five fields and key sets that never repeat.
fn unique_schemas() -> Vec<Value> {
    (0..200)
        .map(|i: usize| {
            let k = 1 + i % 5;
            Value::object((0..k).map(|j| {
                let v = match (i + j) % 4 {
                    0 => Value::from((i * 7 + j) as i64),
                    1 => Value::text(format!("v{i}")),
                    2 => Value::Bool(j % 2 == 0),
                    _ => Value::Null,
                };
                (format!("p{i}_{j}"), v)
            }))
        })
        .collect()
}

fn backfire_regime() -> Outcome {
    let corpus = unique_schemas();
    let mut min_excess = i64::MAX;
    for v in &corpus {
        let json = minimal(v);
        let forced = encode_tron_with(v, TronOptions { min_occurrences: 1 });
        ensure!(forced.len() >= json.len(), "forced TRON smaller for {json}");
        min_excess = min_excess.min(forced.len() as i64 - json.len() as i64);
        let default = encode_tron(v);
        ensure!(
            extract_classes(std::slice::from_ref(v), 2).is_empty(),
            "class emitted for {json}"
        );
        ensure!(default.len() == json.len(), "default TRON differs from JSON for {json}");
    }
    Ok(format!(
        "{} files: forced TRON >= JSON (min excess {min_excess} bytes), default TRON == JSON",
        corpus.len()
    ))
}

fn tabular_compression() -> Outcome {
    let cfg = ToonGrammarConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let v = generate(seed, &GenProfile::tabular());
        let Value::Array(rows) = &v else {
            return Err(format!("seed {seed}: not a table"));
        };
        let cols = rows.first().and_then(Value::as_object).map_or(0, |o| o.len());
        ensure!(
            rows.len() >= 3 && cols >= 2,
            "seed {seed}: {} rows, {cols} columns",
            rows.len()
        );
        let toon = encode_toon(&v, &cfg).len();
        let json = minimal(&v).len();
        ensure!(toon < json, "seed {seed}: toon {toon} >= json {json}");
        worst = worst.max(toon as f64 / json as f64);
    }
    Ok(format!("1000/1000 tables smaller, worst ratio {worst:.3}"))
}

const TASK: &str = "Find trails near Boulder.";

fn search_step() -> Envelope {
    Envelope::Step {
        thought: "Search again for trails.".into(),
        action: "search_trails".into(),
        arguments: Value::object([("query", "Boulder".into())]),
    }
}

/// `steps` identical search calls and a final answer. Each failing turn
/// carries a think block of `pad` characters when `pad` is set.
fn cascade_script(steps: usize, failing: &[usize], pad: Option<usize>) -> Vec<ScriptTurn> {
    let mut turns: Vec<ScriptTurn> = (0..steps).map(|_| ScriptTurn::envelope(search_step())).collect();
    turns.push(ScriptTurn::envelope(Envelope::Final {
        answer: "Wildflower Loop".into(),
    }));
    for &f in failing {
        turns[f].think = pad.map(|n| "x".repeat(n));
    }
    turns
}

fn run_script(turns: &[ScriptTurn], cfg: &LoopConfig) -> TrajectoryRecord {
    let mut exec = TableExecutor::from_json(&read("replay/executor.json")).expect("executor fixture");
    run_trajectory(
        TASK,
        &mut ScriptedAgent::new(turns.to_vec()),
        &mut exec,
        &catalog(),
        cfg,
    )
    .expect("fixture run")
}

/// Byte total of a clean run, summed from the texts that enter the context.
fn clean_total(turns: &[ScriptTurn], cfg: &LoopConfig) -> i64 {
    let mut exec = TableExecutor::from_json(&read("replay/executor.json")).expect("executor fixture");
    let out = cfg.output_format();
    let mut total = build_system_prompt(&catalog(), cfg).text().len() + format!("\n\nTask: {TASK}").len();
    for turn in turns {
        total += turn.render(out).len();
        if let ScriptBody::Envelope(Envelope::Step { action, arguments, .. }) = &turn.body {
            let result = exec.call(action, &minimal(arguments)).expect("fixture result");
            total += 2 + cfg.format.encode(&result).len();
        }
    }
    total as i64
}

fn cascade_arithmetic() -> Outcome {
    let steps = 10;
    let target = LoopConfig::new(Format::Toon, Mode::Full);
    let reference = LoopConfig::new(Format::Json, Mode::InputOnly);
    let observation = format_error_observation(Stage::Decode, Format::Toon).len() as i64;
    // extra context one rejected turn adds: the reply, the separator and the error observation
    let payload = |turns: &[ScriptTurn], f: usize| turns[f].render(Format::Toon).len() as i64 + 2 + observation;

    let base = cascade_script(steps, &[4], None);
    let savings = clean_total(&base, &reference) - clean_total(&base, &target);
    let zero_pad = savings - payload(&base, 4) - "<think></think>\n".len() as i64;
    ensure!(
        zero_pad >= 0,
        "zero crossing unreachable: savings {savings}, payload {}",
        payload(&base, 4)
    );

    let fixtures: [(&str, i64, &[usize], Option<usize>); 3] = [
        ("negative", -1, &[4], None),
        ("zero", 0, &[4], Some(zero_pad as usize)),
        ("positive", 1, &[4, 6], Some(400)),
    ];
    let mut lines = Vec::new();
    for (label, sign, failing, pad) in fixtures {
        let turns = cascade_script(steps, failing, pad);
        // a rejected turn is replayed, shifting later turns by one iteration
        let at = failing.iter().enumerate().map(|(k, f)| f + k);
        let cfg = LoopConfig {
            failure: FailureInjection::at(at, Mutator::SwapDelimiter),
            ..target.clone()
        };
        let record = run_script(&turns, &cfg);
        let json_run = run_script(&turns, &reference);
        let e = record.cascade_count;
        ensure!(e == failing.len(), "{label}: cascade {e}, expected {}", failing.len());

        let s = clean_total(&turns, &reference) - clean_total(&turns, &target);
        let ep: i64 = failing.iter().map(|&f| payload(&turns, f)).sum();
        let predicted = ep - s;
        let t = decompose(&record, &Tokenizer::ByteCount).map_err(|e| e.to_string())?;
        let j = decompose(&json_run, &Tokenizer::ByteCount).map_err(|e| e.to_string())?;
        let measured = t.total as i64 - j.total as i64;
        ensure!(predicted.signum() == sign, "{label}: fixture predicts {predicted}");
        ensure!(
            measured.signum() == predicted.signum(),
            "{label}: measured {measured}, predicted {predicted}"
        );
        ensure!(
            (measured - predicted).abs() <= 1,
            "{label}: measured {measured}, predicted {predicted}"
        );
        ensure!(
            t.call_tokens < j.call_tokens,
            "{label}: call tokens {} >= {}",
            t.call_tokens,
            j.call_tokens
        );
        lines.push(format!("{label} {measured:+} = E*p {ep} - S {s}"));
    }
    Ok(lines.join("; "))
}

fn configs() -> Vec<LoopConfig> {
    let mut out = Vec::new();
    for format in Format::ALL {
        for mode in [Mode::InputOnly, Mode::Full] {
            out.push(LoopConfig::new(format, mode));
        }
    }
    out
}

fn decomposition_integrity() -> Outcome {
    let script = parse_trace(&read("replay/trace.jsonl")).expect("trace fixture");
    let mut checked = 0;
    for cfg in configs() {
        for seed in 0..4u64 {
            let failure = FailureInjection {
                rate: if seed == 0 { 0.0 } else { 0.3 },
                seed,
                ..FailureInjection::none()
            };
            let cfg = LoopConfig { failure, ..cfg.clone() };
            let record = run_script(&script, &cfg);
            for tok in [Tokenizer::ByteCount, Tokenizer::WordRegex] {
                let b = decompose(&record, &tok).map_err(|e| e.to_string())?;
                ensure!(
                    b.schema_tokens + b.call_tokens + b.result_tokens <= b.total,
                    "{cfg:?}: components exceed total"
                );
                ensure!(
                    b.total == b.prompt_tokens + b.completion_tokens,
                    "{cfg:?}: total is not prompt + completion"
                );
                let d = delta_vs_baseline(&b, &b, "self");
                for (name, p) in d.rows() {
                    ensure!(p == Percent(Some(0.0)) || p == Percent(None), "self delta {name} = {p}");
                    ensure!(
                        p.0.is_none() || p.to_string() == "0.0%",
                        "self delta {name} renders {p}"
                    );
                }
                checked += 1;
            }
        }
    }

    let tok = Tokenizer::ByteCount;
    let corpus = vec![
        ("figure3.json".to_owned(), read("figure3.json")),
        ("catalog.json".to_owned(), read("replay/catalog.json")),
        ("executor.json".to_owned(), read("replay/executor.json")),
    ];
    let corpus_report = measure(&corpus, &tok, false).map_err(|e| e.to_string())?;
    let opts = ReplayOptions {
        format: Format::Toon,
        mode: Mode::Full,
        failure: FailureInjection {
            rate: 0.3,
            seed: 1,
            ..FailureInjection::none()
        },
        tron_batching: true,
        max_iterations: DEFAULT_MAX_ITERATIONS,
        task: TASK.into(),
    };
    let traces = vec![("trace.jsonl".to_owned(), read("replay/trace.jsonl"))];
    let replay_report = replay(
        &traces,
        &read("replay/catalog.json"),
        &read("replay/executor.json"),
        &opts,
        &tok,
    )
    .map_err(|e| e.to_string())?;
    for (what, report, table) in [
        ("measure", corpus_report.to_value(), corpus_report.render()),
        ("replay", replay_report.to_value(), replay_report.render()),
    ] {
        let Some(Value::Array(aggs)) = report.as_object().and_then(|o| o.get("aggregates")) else {
            return Err(format!("{what}: no aggregates"));
        };
        let labels: Vec<&str> = aggs
            .iter()
            .filter_map(|a| a.as_object()?.get("label")?.as_text())
            .collect();
        ensure!(labels == [MEAN_LABEL, SUM_LABEL], "{what}: aggregate labels {labels:?}");
        ensure!(
            table.contains(MEAN_LABEL) && table.contains(SUM_LABEL),
            "{what}: table lacks aggregate labels"
        );
    }
    Ok(format!(
        "{checked} breakdowns additive, self-delta 0.0%, both aggregates labelled in measure and replay"
    ))
}

fn envelope_preprocessing() -> Outcome {
    let step = Envelope::Step {
        thought: "Check the weather first.".into(),
        action: "get_weather".into(),
        arguments: Value::object([("city", "Boulder".into())]),
    };
    let mut grid = 0;
    for format in Format::ALL {
        let clean = parse_envelope(&step.render(format), format)
            .map_err(|e| e.to_string())?
            .envelope;
        ensure!(clean == step, "{format}: clean document parses to {clean:?}");
        for (think, fenced) in [(false, false), (true, false), (false, true), (true, true)] {
            let turn = ScriptTurn {
                think: think.then(|| "plan: call {get_weather} with \"city\", then answer".to_owned()),
                fenced,
                ..ScriptTurn::envelope(step.clone())
            };
            let raw = turn.render(format);
            let parsed =
                parse_envelope(&raw, format).map_err(|e| format!("{format} think={think} fence={fenced}: {e}"))?;
            ensure!(
                parsed.envelope == clean,
                "{format} think={think} fence={fenced}: different envelope"
            );
            ensure!(
                parsed.think_stripped == think && parsed.fence_extracted == fenced,
                "{format}: flags wrong"
            );
            grid += 1;
        }
    }
    let mut mutated = 0;
    for format in Format::ALL {
        let raw = step.render(format);
        for (mutator, stage) in [
            (Mutator::TruncateLastLine, Stage::Decode),
            (Mutator::SwapDelimiter, Stage::Decode),
            (Mutator::RenameActionKey, Stage::Shape),
        ] {
            let got = parse_envelope(&mutator.apply(&raw, format), format).map(|p| p.envelope);
            ensure!(
                matches!(&got, Err(f) if f.stage == stage),
                "{format} {}: expected {stage} failure, got {got:?}",
                mutator.name()
            );
            mutated += 1;
        }
    }
    for (raw, stage) in [
        ("<think>never closed {\"a\":1}", Stage::Think),
        ("```json\n{}", Stage::Fence),
    ] {
        let got = parse_envelope(raw, Format::Json);
        ensure!(
            matches!(&got, Err(f) if f.stage == stage),
            "{raw:?}: expected {stage}, got {got:?}"
        );
    }
    Ok(format!(
        "{grid}/12 grid cases, {mutated}/9 mutator stages, think and fence failures distinct"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "sample document golden fidelity",
            golden_fidelity,
            Duration::from_secs(1),
        ),
        ("round-trip property", roundtrip_property, Duration::from_secs(120)),
        ("tron batching condition", batching_condition, Duration::from_secs(1)),
        ("backfire regime", backfire_regime, Duration::from_secs(1)),
        ("tabular compression", tabular_compression, Duration::from_secs(30)),
        ("cascade arithmetic", cascade_arithmetic, Duration::from_secs(5)),
        (
            "decomposition integrity",
            decomposition_integrity,
            Duration::from_secs(5),
        ),
        ("envelope preprocessing", envelope_preprocessing, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}; {elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
