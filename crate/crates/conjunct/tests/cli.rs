mod support;

use support::e2e::*;

#[test]
fn identical_seeds_give_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path(), 7).unwrap();
    let second = run_pipeline(b.path(), 7).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.len(), ARTIFACTS.len());
}

#[test]
fn different_seeds_give_different_models() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path(), 7).unwrap();
    let second = run_pipeline(b.path(), 8).unwrap();
    assert_ne!(first["models/detector.ckpt"], second["models/detector.ckpt"]);
}

#[test]
fn gold_copied_predictions_score_100() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), 3).unwrap();
    let out = conjunct(dir.path(), &["evaluate", "--gold", "gold.jsonl", "--pred", "gold.jsonl", "--json", "r.json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["f1"], 100.0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("100.0"), "{table}");
}

#[test]
fn subsets_sum_to_overall() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), 5).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    for field in ["gold", "predicted", "matched"] {
        let sum = report["simple"]["counts"][field].as_u64().unwrap() + report["complex"]["counts"][field].as_u64().unwrap();
        assert_eq!(sum, report["overall"]["counts"][field].as_u64().unwrap(), "{field}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(conjunct(d, &["predict", "--input", "missing.jsonl", "--models", "m"]).status.code(), Some(2));
    assert_eq!(conjunct(d, &["train", "detector", "--data", "missing.jsonl", "--out", "x"]).status.code(), Some(2));
    assert_eq!(conjunct(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(conjunct(d, &["--help"]).status.code(), Some(0));

    std::fs::write(d.join("bad.mrg"), "(S (NN a))\n(S (NN b)))").unwrap();
    let out = conjunct(d, &["labelgen", "bad.mrg", "-o", "i.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.mrg:2:"), "{err}");
    assert!(err.contains("offset"), "{err}");

    std::fs::write(d.join("bad.jsonl"), "{\"tokens\": 3}\n").unwrap();
    let out = conjunct(d, &["train", "identifier", "--data", "bad.jsonl", "--out", "x.ckpt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn labelgen_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(conjunct(d, &["synth", "-o", "t.mrg", "--sentences", "20"]).status.success());
    assert!(conjunct(d, &["labelgen", "t.mrg", "-o", "a.jsonl"]).status.success());
    assert!(conjunct(d, &["labelgen", "t.mrg", "-o", "a.conll", "--format", "conll"]).status.success());
    let jsonl = std::fs::read_to_string(d.join("a.jsonl")).unwrap().lines().count();
    let conll = std::fs::read_to_string(d.join("a.conll")).unwrap().matches("# target").count();
    assert_eq!(jsonl, conll);
    assert!(jsonl > 20);
}

#[test]
fn model_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), 2).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_conjunct"))
        .current_dir(dir.path())
        .env("CONJUNCT_MODEL_DIR", "models")
        .args(["predict", "--input", "input.jsonl", "-o", "env.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("env.jsonl")).unwrap(),
        std::fs::read(dir.path().join("predictions.jsonl")).unwrap()
    );
}
