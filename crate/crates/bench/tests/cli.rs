use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use notation_core::{decode_json, encode_json, JsonStyle, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_notation"));
    cmd.env_remove("NOTATION_FORMAT");
    cmd
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn convert(input: &Path, from: &str, to: &str) -> (i32, String, String) {
    run(bin().arg("convert").arg(input).args(["--from", from, "--to", to]))
}

fn unwrap_tron_display(text: &str) -> String {
    let (header, body) = text.split_once("\n\n").unwrap();
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
    format!("{header}\n\n{out}\n")
}

#[test]
fn json_to_toon_matches_golden_file() {
    let (code, out, _) = convert(&fixtures().join("figure3.json"), "json", "toon");
    assert_eq!(code, 0);
    assert_eq!(out, std::fs::read_to_string(fixtures().join("figure3.toon")).unwrap());
}

#[test]
fn json_to_tron_matches_unwrapped_golden_file() {
    let (code, out, _) = convert(&fixtures().join("figure3.json"), "json", "tron");
    assert_eq!(code, 0);
    assert_eq!(
        out,
        unwrap_tron_display(&std::fs::read_to_string(fixtures().join("figure3.tron")).unwrap())
    );
}

#[test]
fn minimal_json_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (_, once, _) = convert(&fixtures().join("figure3.json"), "json", "json");
    let path = dir.path().join("once.json");
    std::fs::write(&path, &once).unwrap();
    let (code, twice, _) = convert(&path, "json", "json");
    assert_eq!(code, 0);
    assert_eq!(once, twice);
}

#[test]
fn composition_through_every_format_restores_minimal_json() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["figure3.json", "replay/catalog.json", "replay/executor.json"] {
        let original = decode_json(&std::fs::read_to_string(fixtures().join(name)).unwrap()).unwrap();
        for via in ["toon", "tron"] {
            let (code, encoded, _) = convert(&fixtures().join(name), "json", via);
            assert_eq!(code, 0);
            let path = dir.path().join(format!("doc.{via}"));
            std::fs::write(&path, encoded).unwrap();
            let (code, back, _) = convert(&path, via, "json");
            assert_eq!(code, 0, "{name} via {via}");
            assert_eq!(back.trim_end(), encode_json(&original, JsonStyle::Minimal));
        }
    }
}

#[test]
fn env_var_selects_format_and_flag_wins() {
    let input = fixtures().join("figure3.json");
    let (_, out, _) = run(bin().arg("convert").arg(&input).env("NOTATION_FORMAT", "toon"));
    assert!(out.starts_with("context:\n"));
    let (_, out, _) = run(bin()
        .arg("convert")
        .arg(&input)
        .env("NOTATION_FORMAT", "toon")
        .args(["--to", "tron"]));
    assert!(out.starts_with("class A: "));
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"a\":1,\"a\":2}").unwrap();
    let (code, _, err) = convert(&bad, "json", "toon");
    assert_eq!(code, 2);
    assert!(err.contains("duplicate"), "{err}");
    assert_eq!(convert(&dir.path().join("missing.json"), "json", "toon").0, 3);
    assert_eq!(run(bin().args(["convert", "--to", "yaml"])).0, 64);
    assert_eq!(run(bin().arg("frobnicate")).0, 64);
    assert_eq!(run(bin().arg("--help")).0, 0);
    assert_eq!(run(bin().args(["roundtrip", "--count", "0"])).0, 64);
}

#[test]
fn display_wrapped_tron_is_not_valid_tron() {
    assert_eq!(convert(&fixtures().join("figure3.tron"), "tron", "json").0, 2);
}

fn write_corpus(dir: &Path, docs: &[(&str, Value)]) {
    for (name, v) in docs {
        std::fs::write(dir.join(name), encode_json(v, JsonStyle::Pretty { indent_width: 2 })).unwrap();
    }
}

fn report(path: &Path) -> Value {
    decode_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn field<'a>(v: &'a Value, path: &[&str]) -> &'a Value {
    path.iter().fold(v, |v, k| {
        v.as_object()
            .and_then(|o| o.get(k))
            .unwrap_or_else(|| panic!("missing {k}"))
    })
}

fn pct(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_str().parse().unwrap(),
        other => panic!("not a percentage: {other:?}"),
    }
}

fn aggregates(r: &Value) -> Vec<Value> {
    let Value::Array(items) = field(r, &["aggregates"]) else {
        panic!()
    };
    items.clone()
}

#[test]
fn measure_sample_corpus() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("figure3.json"), dir.path().join("figure3.json")).unwrap();
    let out_path = dir.path().join("report.out");
    let (code, table, _) = run(bin().arg("measure").arg(dir.path()).arg("--out").arg(&out_path));
    assert_eq!(code, 0);
    let r = report(&out_path);
    let Value::Array(files) = field(&r, &["files"]) else {
        panic!()
    };
    assert_eq!(files.len(), 1);
    let toon = pct(field(&files[0], &["toon_delta_pct"]));
    assert!(toon < 0.0);
    // table and report carry the same numbers
    assert!(table.contains(&format!("{toon:+.1}%")));
    for key in ["json", "toon", "tron"] {
        let Value::Number(n) = field(&files[0], &[key, "tokens"]) else {
            panic!()
        };
        assert!(table.contains(n.as_str()));
    }
    let labels: Vec<_> = aggregates(&r).iter().map(|a| field(a, &["label"]).clone()).collect();
    assert_eq!(
        labels,
        [Value::text("mean-of-percentages"), Value::text("absolute-sum")]
    );
    assert!(table.contains("mean-of-percentages") && table.contains("absolute-sum"));
}

#[test]
fn measure_fails_closed_on_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("figure3.json"), dir.path().join("a.json")).unwrap();
    std::fs::write(dir.path().join("b.json"), "{oops").unwrap();
    let out_path = dir.path().join("report.out");
    let (code, stdout, _) = run(bin().arg("measure").arg(dir.path()).arg("--out").arg(&out_path));
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    assert!(!out_path.exists());
}

#[test]
fn unique_small_schemas_backfire_and_batching_recovers() {
    let unique = tempfile::tempdir().unwrap();
    let docs: Vec<(String, Value)> = (0..6)
        .map(|i| {
            let v = Value::object((0..=i % 4).map(|k| (format!("f{i}_{k}"), Value::from(k as i64))));
            (format!("{i:02}.json"), v)
        })
        .collect();
    let refs: Vec<(&str, Value)> = docs.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    write_corpus(unique.path(), &refs);
    let out_path = unique.path().join("report.out");
    assert_eq!(
        run(bin().arg("measure").arg(unique.path()).arg("--out").arg(&out_path)).0,
        0
    );
    let r = report(&out_path);
    let Value::Array(files) = field(&r, &["files"]) else {
        panic!()
    };
    assert!(files.iter().all(|f| pct(field(f, &["tron_delta_pct"])) >= 0.0));

    let repeated = tempfile::tempdir().unwrap();
    let row = |i: i64| Value::object([("id", Value::from(i)), ("city", "Boulder".into()), ("ok", true.into())]);
    let docs: Vec<(String, Value)> = (0..8).map(|i| (format!("{i:02}.json"), row(i))).collect();
    let refs: Vec<(&str, Value)> = docs.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    write_corpus(repeated.path(), &refs);
    let out_path = repeated.path().join("report.out");
    assert_eq!(
        run(bin()
            .arg("measure")
            .arg(repeated.path())
            .arg("--batch")
            .arg("--out")
            .arg(&out_path))
        .0,
        0
    );
    let r = report(&out_path);
    let agg = aggregates(&r);
    assert_eq!(field(&agg[0], &["tron_delta_pct"]), &Value::Null);
    assert!(pct(field(&agg[1], &["tron_delta_pct"])) < 0.0);
}

fn replay_cmd() -> Command {
    let mut cmd = bin();
    let f = fixtures().join("replay");
    cmd.arg("replay")
        .arg("--trace")
        .arg(f.join("trace.jsonl"))
        .arg("--catalog")
        .arg(f.join("catalog.json"))
        .arg("--executor")
        .arg(f.join("executor.json"));
    cmd
}

#[test]
fn replay_without_failures_matches_reference_calls() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["json", "toon", "tron"] {
        for mode in ["input-only", "full"] {
            let out_path = dir.path().join("r.out");
            let (code, _, err) = run(replay_cmd()
                .args(["--format", format, "--mode", mode])
                .arg("--out")
                .arg(&out_path));
            assert_eq!(code, 0, "{err}");
            let r = report(&out_path);
            let Value::Array(rows) = field(&r, &["traces"]) else {
                panic!()
            };
            assert_eq!(field(&rows[0], &["target", "cascade_count"]), &Value::from(0));
            assert_eq!(
                field(&rows[0], &["target", "calls"]),
                field(&rows[0], &["reference", "calls"])
            );
            assert_eq!(
                field(&rows[0], &["target", "iterations"]),
                field(&rows[0], &["reference", "iterations"])
            );
        }
    }
}

#[test]
fn replay_reports_injected_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.out");
    let (code, table, _) = run(replay_cmd()
        .args([
            "--format",
            "toon",
            "--mode",
            "full",
            "--fail-at",
            "2",
            "--mutator",
            "truncate",
        ])
        .arg("--out")
        .arg(&out_path));
    assert_eq!(code, 0);
    let r = report(&out_path);
    let Value::Array(rows) = field(&r, &["traces"]) else {
        panic!()
    };
    assert_eq!(field(&rows[0], &["target", "cascade_count"]), &Value::from(1));
    assert_eq!(field(&rows[0], &["target", "iterations"]), &Value::from(6));
    assert!(table.contains("mean-of-percentages"));
}

#[test]
fn replay_rejects_broken_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("executor.json");
    std::fs::write(&empty, "{}").unwrap();
    let f = fixtures().join("replay");
    let (code, _, err) = run(bin()
        .arg("replay")
        .arg("--trace")
        .arg(f.join("trace.jsonl"))
        .arg("--catalog")
        .arg(f.join("catalog.json"))
        .arg("--executor")
        .arg(&empty));
    assert_eq!(code, 2);
    assert!(err.contains("no fixture result"), "{err}");
    assert_eq!(run(replay_cmd().args(["--failure-rate", "1.5"])).0, 64);
}

#[test]
fn roundtrip_command() {
    let (code, out, _) = run(bin().args(["roundtrip", "--count", "10000", "--profile", "default"]));
    assert_eq!(code, 0);
    assert!(out.contains("10000 documents"));
    assert_eq!(
        run(bin().args(["roundtrip", "--count", "1", "--seed", "7", "--profile", "delimiter"])).0,
        0
    );
}

#[test]
fn bpe_tokenizer_from_vocab_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("vocab.json"),
        r#"{"a":0,"b":1,"ab":2,"{":3,"}":4,"\"":5,":":6,"1":7}"#,
    )
    .unwrap();
    std::fs::write(dir.path().join("merges.txt"), "#version: 0.2\na b\n").unwrap();
    let corpus = tempfile::tempdir().unwrap();
    std::fs::write(corpus.path().join("x.json"), r#"{"ab":1}"#).unwrap();
    let (code, out, err) = run(bin()
        .arg("measure")
        .arg(corpus.path())
        .args(["--tokenizer", "bpe", "--vocab"])
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("tokenizer: bpe"));
    assert_eq!(
        run(bin().arg("measure").arg(corpus.path()).args(["--tokenizer", "bpe"])).0,
        64
    );
}
