use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

pub fn conjunct(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conjunct"))
        .current_dir(dir)
        .env_remove("CONJUNCT_MODEL_DIR")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn step(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = conjunct(dir, args);
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`conjunct {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

pub const ARTIFACTS: &[&str] = &[
    "treebank.mrg",
    "instances.jsonl",
    "gold.jsonl",
    "models/identifier.ckpt",
    "models/detector.ckpt",
    "input.jsonl",
    "predictions.jsonl",
    "report.json",
    "split.jsonl",
];

/// Runs synth, labelgen, both trainings, predict, evaluate and split in
/// `dir` and returns the SHA-256 of every artifact.
pub fn run_pipeline(dir: &Path, seed: u64) -> Result<BTreeMap<String, String>, String> {
    let seed = seed.to_string();
    step(dir, &["synth", "-o", "treebank.mrg", "--sentences", "30", "--seed", &seed])?;
    step(dir, &["labelgen", "treebank.mrg", "-o", "instances.jsonl", "--sentences", "gold.jsonl"])?;
    for task in ["identifier", "detector"] {
        let out = format!("models/{task}.ckpt");
        step(dir, &["train", task, "--data", "instances.jsonl", "--out", &out, "--epochs", "5", "--seed", &seed])?;
    }
    let gold = std::fs::read_to_string(dir.join("gold.jsonl")).map_err(|e| e.to_string())?;
    let mut input = String::new();
    for (i, line) in gold.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let words: Vec<&str> = v["tokens"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
        input.push_str(&serde_json::json!({ "id": i, "text": words.join(" ") }).to_string());
        input.push('\n');
    }
    std::fs::write(dir.join("input.jsonl"), input).map_err(|e| e.to_string())?;
    step(dir, &["predict", "--models", "models", "--input", "input.jsonl", "-o", "predictions.jsonl"])?;
    step(dir, &["evaluate", "--gold", "gold.jsonl", "--models", "models", "--omit-timing", "--json", "report.json"])?;
    step(dir, &["split", "--input", "predictions.jsonl", "-o", "split.jsonl"])?;

    let mut digests = BTreeMap::new();
    for name in ARTIFACTS {
        let bytes = std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        digests.insert(name.to_string(), Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect());
    }
    Ok(digests)
}
