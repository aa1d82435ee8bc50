mod common;

use std::path::Path;
use std::process::{Command, Output};

use source_tracing::config::RunConfig;
use source_tracing::pipeline::{SCORES_GCN, SCORES_GCN_VAL};
use source_tracing::scoring::{read_score_table, ScoreTable};
use source_tracing::synthetic::{write_synthetic_corpus, SyntheticSpec};

fn source_trace(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_source-trace"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_corpus(dir: &Path, epochs: usize) -> std::path::PathBuf {
    let spec = SyntheticSpec {
        papers: 6,
        ..SyntheticSpec::default()
    };
    let mut cfg: RunConfig = write_synthetic_corpus(&spec, dir).unwrap();
    cfg.gcn.epochs = epochs;
    cfg.embedder = source_tracing::config::EmbedderConfig::Builtin { dim: 64, seed: 1 };
    let path = dir.join("run.json");
    cfg.write(&path).unwrap();
    path
}

#[test]
fn full_command_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_corpus(dir.path(), 20);
    for cmd in ["extract", "build-graph", "train-gcn", "score"] {
        ok(source_trace(&cfg, &[cmd]));
    }
    let work = dir.path().join("work");
    let val = read_score_table(work.join(SCORES_GCN_VAL)).unwrap();
    let split: source_tracing::scoring::SplitAssignment =
        serde_json::from_str(&std::fs::read_to_string(work.join("split.json")).unwrap()).unwrap();
    assert_eq!(val.paper_ids(), split.val);

    let all = work.join(SCORES_GCN);
    let all_str = all.to_str().unwrap();
    let one = ok(source_trace(&cfg, &["eval", all_str]));
    assert_eq!(one.lines().filter(|l| l.starts_with("gcn ")).count(), 1);

    let a = format!("a={all_str}");
    let b = format!("b={all_str}");
    let c = format!("c={all_str}");
    let three = ok(source_trace(&cfg, &["eval", &a, &b, &c, "--ensemble"]));
    let report: serde_json::Value = serde_json::from_str(&three[three.find('{').unwrap()..]).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["tag"], "a+b+c");
    assert_eq!(rows[0]["map"], rows[3]["map"]);

    let ens = work.join("ens.json");
    ok(source_trace(
        &cfg,
        &["ensemble", &a, &b, "--out", ens.to_str().unwrap()],
    ));
    let e = read_score_table(&ens).unwrap();
    let base = read_score_table(&all).unwrap();
    for (p, r) in base.keys() {
        assert_eq!(e.get(&p, &r), base.get(&p, &r));
    }
}

#[test]
fn mismatched_tables_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_corpus(dir.path(), 1);
    let t1 = dir.path().join("t1.json");
    let t2 = dir.path().join("t2.json");
    let mut a = ScoreTable::new("a");
    a.insert("syn000", "syn000-r0", 0.5).unwrap();
    let mut b = ScoreTable::new("b");
    b.insert("syn000", "syn000-r1", 0.5).unwrap();
    a.write(&t1).unwrap();
    b.write(&t2).unwrap();
    let out = source_trace(&cfg, &["ensemble", t1.to_str().unwrap(), t2.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("syn000-r0") && err.contains("syn000-r1"), "{err}");
}

#[test]
fn zero_epochs_scores_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_corpus(dir.path(), 0);
    for cmd in ["extract", "build-graph", "train-gcn"] {
        ok(source_trace(&cfg, &[cmd]));
    }
    let val = read_score_table(dir.path().join("work").join(SCORES_GCN_VAL)).unwrap();
    assert!(!val.is_empty());
    assert!(val.papers().all(|(_, refs)| refs.values().all(|&s| s == 0.5)));
}

#[test]
fn checkpoints_are_bit_identical_across_runs() {
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_corpus(dir.path(), 15);
        for cmd in ["extract", "build-graph", "train-gcn"] {
            ok(source_trace(&cfg, &[cmd]));
        }
        bytes.push(std::fs::read(dir.path().join("work/checkpoint.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn missing_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new("nope.json", ".", "work");
    let path = dir.path().join("run.json");
    cfg.write(&path).unwrap();
    assert!(!source_trace(&path, &["extract"]).status.success());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_corpus(dir.path(), 3);
    let out = ok(source_trace(
        &cfg,
        &["--epochs", "7", "--weights", "1,2", "show-config"],
    ));
    let shown: RunConfig = serde_json::from_str(&out).unwrap();
    assert_eq!(shown.gcn.epochs, 7);
    assert_eq!(shown.ensemble.weights, Some(vec![1.0, 2.0]));
}
