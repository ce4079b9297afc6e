use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use convoeval::report::names;

const BIN: &str = env!("CARGO_BIN_EXE_convoeval");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const MEETING: &str = r#"{"id":"m1","history_length":2,"is_generated":true,"agenda":{"items":[{"id":"budget","text":"budget numbers for next quarter"},{"id":"hiring","text":"hiring plan for the new team"}],"edges":[["budget","hiring"]],"start":"budget"},"objective":{"mode":"artifact","criteria":[{"kind":"contains","arg":"total"}]},"turns":[{"speaker":"ana","text":"Let's start with the budget numbers for next quarter."},{"speaker":"ben","text":"The budget numbers look tight, travel went over."},{"speaker":"ana","text":"@ben can you cut travel by ten percent?"},{"speaker":"ben","text":"Yes, I can cut travel and keep the training budget."},{"speaker":"cho","text":"Then we should talk about the hiring plan for the new team."},{"speaker":"ana","text":"Agreed. How many engineers does the hiring plan need?"},{"speaker":"cho","text":"Two engineers for the new team, starting in spring.\n```\ntotal: 2 hires\n```"}]}
{"id":"m2","turns":[{"speaker":"ana","text":"Quick sync on the release."},{"speaker":"ben","text":"The release is on track."}]}
"#;

const PROFILES: &str = r#"{"speaker":"ana","background":"finance lead who owns the budget"}
{"speaker":"ben","background":"operations manager tracking travel costs"}
"#;

fn meeting_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("meetings.jsonl"), MEETING).unwrap();
    std::fs::write(dir.path().join("profiles.jsonl"), PROFILES).unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "datasets = [\"meetings.jsonl\"]\nprofiles = \"profiles.jsonl\"\nk = 4\n\n[providers]\nnum_topics = 4\nlda_iterations = 50\n",
    )
    .unwrap();
    dir
}

#[test]
fn eval_reports_every_metric() {
    let dir = meeting_dir();
    let o = run(dir.path(), &["eval", "--config", "run.toml", "--out", "r.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("r.json"));
    for key in ["fingerprint", "providers", "per_conversation", "aggregates"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let all: Vec<&str> = [
        names::LOCAL_SPEAKER,
        names::LOCAL_CONTENT,
        names::LOCAL_CONSISTENCY,
        names::GLOBAL_SPEAKER,
        names::GLOBAL_CONTENT,
        names::GLOBAL_CONSISTENCY,
    ]
    .concat();
    let m1 = &r["per_conversation"]["m1"];
    for m in &all {
        assert!(m1.get(*m).is_some(), "m1 lacks {m}");
    }
    // the last turn carries the artifact, and profiles exist for two speakers
    assert_eq!(m1["TaskSuccess"], 1.0);
    assert!(m1["LS-ES-aug-avg"].is_number());
    assert!(m1["AP"].is_number());
    assert!(m1["CS"].is_number() || r["null_reasons"]["m1"]["CS"].is_string());
    // m2 has neither agenda nor objective; without history every turn counts
    let m2 = &r["per_conversation"]["m2"];
    assert!(m2["ACR"].is_null());
    assert_eq!(r["null_reasons"]["m2"]["ACR"], "no_agenda");
    assert_eq!(r["null_reasons"]["m2"]["TaskSuccess"], "no_objective");
    assert_eq!(m2["NSE"], 1.0);
    assert_eq!(r["aggregates"]["NSE"]["n"], 2);
    assert_eq!(r["aggregates"]["TaskSuccess"]["n"], 1);
}

#[test]
fn suites_filter_and_csv() {
    let dir = meeting_dir();
    let o = run(
        dir.path(),
        &["eval", "--config", "run.toml", "--suites", "global_speaker", "--format", "csv", "--out", "r.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "conversation,NSE,SC-Gini");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("m2,1"), "{}", lines[2]);
}

#[test]
fn resume_reuses_and_checks_fingerprint() {
    let dir = meeting_dir();
    let first = run(dir.path(), &["eval", "--config", "run.toml", "--out", "r.json"]);
    assert_eq!(code(&first), 0);
    let before = read_json(&dir.path().join("r.json"));
    let again = run(dir.path(), &["eval", "--config", "run.toml", "--out", "r.json", "--resume"]);
    assert_eq!(code(&again), 0);
    let after = read_json(&dir.path().join("r.json"));
    assert_eq!(before["per_conversation"], after["per_conversation"]);
    assert_eq!(before["fingerprint"], after["fingerprint"]);

    let other = run(
        dir.path(),
        &["eval", "--config", "run.toml", "--seed", "5", "--out", "r.json", "--resume"],
    );
    assert_eq!(code(&other), 2);
    assert!(String::from_utf8_lossy(&other.stderr).contains("fingerprint"));
}

#[test]
fn synth_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["synth", "--out", "s.jsonl", "--conversations", "4", "--seed", "9"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("s.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);

    let o = run(dir.path(), &["eval", "--dataset", "s.jsonl", "--suites", "global", "--out", "r.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["inspect", "r.json", "--metric", "NSE"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("s\tNSE\t") && l.ends_with("(n=4)")), "{out}");

    let o = run(dir.path(), &["inspect", "r.json", "--metric", "NOPE"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn print_defaults_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["eval", "--print-defaults", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    std::fs::write(dir.path().join("c.toml"), &o.stdout).unwrap();
    let o2 = run(dir.path(), &["eval", "--config", "c.toml", "--print-defaults"]);
    assert_eq!(code(&o2), 0);
    assert_eq!(o.stdout, o2.stdout);
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed = 3"));
}

#[test]
fn exit_codes() {
    let dir = meeting_dir();
    assert_eq!(code(&run(dir.path(), &["eval", "--format", "xml"])), 1);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["eval", "--dataset", "missing.jsonl"])), 2);
    assert_eq!(code(&run(dir.path(), &["eval"])), 2);
    assert_eq!(code(&run(dir.path(), &["eval", "--config", "run.toml", "--suites", "bogus"])), 2);

    std::fs::write(dir.path().join("bad.jsonl"), "{\"id\": \"x\", \"turns\": []}\n").unwrap();
    let o = run(dir.path(), &["eval", "--dataset", "bad.jsonl"]);
    assert_eq!(code(&o), 2);

    // nothing listens on the discard port
    std::fs::write(
        dir.path().join("remote.toml"),
        "datasets = [\"meetings.jsonl\"]\n[providers]\nendpoint = \"http://127.0.0.1:9\"\nremote_retries = 0\nremote_timeout_ms = 2000\n",
    )
    .unwrap();
    let o = run(dir.path(), &["eval", "--config", "remote.toml", "--providers", "remote"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["providers", "ping", "--config", "remote.toml"]);
    assert_eq!(code(&o), 3);
    let o = run(dir.path(), &["providers", "ping"]);
    assert_eq!(code(&o), 0);
}
