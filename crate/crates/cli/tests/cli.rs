use std::path::Path;
use std::process::{Command, Output};

fn perspectra(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perspectra"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = perspectra(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn blame_line(report: &str, name: &str) -> f64 {
    report
        .lines()
        .filter_map(|l| l.strip_prefix("# mean blame  "))
        .find_map(|rest| {
            let (key, value) = rest.split_once(": ")?;
            (key == name).then(|| value.split_whitespace().next()?.parse().ok()).flatten()
        })
        .unwrap_or_else(|| panic!("no blame line for {name}"))
}

#[test]
fn demo_is_deterministic_and_raises_blame() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &["--output-dir", "a", "demo", "--seed", "7"]);
    let b = ok(dir.path(), &["--output-dir", "b", "demo", "--seed", "7"]);
    assert_eq!(a, b);
    for f in ["tables.txt", "perspective.tsv", "content.tsv", "human.tsv", "report.json"] {
        let x = std::fs::read(dir.path().join("a/demo").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b/demo").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let source = blame_line(&a, "source");
    for system in ["base", "src-meta", "meta-src"] {
        let out = blame_line(&a, system);
        assert!(out > source, "{system}: {out} <= {source}");
    }
    assert!(std::fs::read_dir(dir.path().join("a/manifests")).unwrap().count() == 1);
    assert!(dir.path().join("a/demo/outputs/base.tsv").is_file());
}

#[test]
fn evaluate_without_outputs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = perspectra(dir.path(), &["evaluate", "--system", "base", "--pairs", "p.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--outputs"));
    let out = perspectra(dir.path(), &["mine-pairs", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_store_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = perspectra(dir.path(), &["mine-pairs", "--out", "p.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: no corpus store given"));
    let out = perspectra(dir.path(), &["--store", "nope", "mine-pairs", "--out", "p.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn staged_pipeline_with_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("perspectra.toml"), "store = \"store\"\nseed = 3\noutput_dir = \"runs\"\n[train]\nbt_iterations = 1\nepochs_per_round = 2\n").unwrap();
    ok(d, &["--no-manifest", "demo", "--cases", "12", "--pretrain-epochs", "1", "--no-prompt-systems", "--export-corpus", "corpus.jsonl"]);
    ok(d, &["ingest", "corpus.jsonl", "--out", "store"]);
    ok(d, &["mine-pairs", "--dimension", "blame_murderer", "--out", "pairs.jsonl", "--tsv", "review.tsv"]);

    // accept every pair on the review sheet
    let sheet = std::fs::read_to_string(d.join("review.tsv")).unwrap();
    let filled: String = sheet
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("{}overlapping\n", l.strip_suffix("unreviewed").unwrap()) })
        .collect();
    std::fs::write(d.join("decisions.tsv"), filled).unwrap();
    ok(d, &["review", "--pairs", "pairs.jsonl", "--decisions", "decisions.tsv", "--reviewer", "t", "--journal", "review.jsonl", "--out", "reviewed.jsonl"]);
    let mined = std::fs::read_to_string(d.join("pairs.jsonl")).unwrap().lines().count();
    let reviewed = std::fs::read_to_string(d.join("reviewed.jsonl")).unwrap().lines().count();
    assert_eq!(mined, reviewed);
    ok(d, &["dedupe", "--pairs", "reviewed.jsonl", "--out", "unique.jsonl"]);
    ok(d, &["train-scorer", "--out", "scorer.json"]);
    ok(d, &["train-bt", "--variant", "meta-src", "--pretrain-epochs", "1", "--out", "ck"]);
    assert!(d.join("ck/meta-src/round_1/lh/model.json").is_file());
    ok(d, &["rewrite", "--pairs", "reviewed.jsonl", "--model", "ck/meta-src/round_1/lh", "--variant", "meta-src", "--out", "ms.tsv"]);
    ok(d, &["rewrite-llm", "--pairs", "reviewed.jsonl", "--mode", "naive-zero", "--out", "nz.tsv"]);
    let report = ok(d, &["evaluate", "--pairs", "reviewed.jsonl", "--scorer", "scorer.json", "--system", "meta-src", "--outputs", "ms.tsv", "--system", "na-zero", "--outputs", "nz.tsv"]);
    assert!(report.contains("meta-src") && report.contains("na-zero"));
    ok(d, &["build-survey", "--pairs", "reviewed.jsonl", "--outputs", "meta-src=ms.tsv", "--outputs", "na-zero=nz.tsv", "--candidates", "3", "--out", "survey.json"]);
    let survey = std::fs::read_to_string(d.join("survey.json")).unwrap();
    assert!(survey.contains("\"system_id\": \"gold\""));

    // replay the mining step from its manifest and compare outputs
    let manifests: Vec<_> = std::fs::read_dir(d.join("runs/manifests")).unwrap().map(|e| e.unwrap().path()).collect();
    let mine = manifests.iter().find(|p| p.to_string_lossy().ends_with("-mine-pairs.json")).unwrap();
    let before = std::fs::read(d.join("pairs.jsonl")).unwrap();
    std::fs::remove_file(d.join("pairs.jsonl")).unwrap();
    ok(d, &["replay", mine.to_str().unwrap()]);
    assert_eq!(std::fs::read(d.join("pairs.jsonl")).unwrap(), before);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(mine).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 3);
    assert!(m["inputs"].as_object().unwrap().keys().any(|k| k.ends_with("store")));
    assert!(m["versions"]["perspectra-core"].is_string());

    // a changed input blocks replay unless forced
    let eval_manifest = manifests.iter().find(|p| p.to_string_lossy().ends_with("-evaluate.json")).unwrap();
    std::fs::write(d.join("nz.tsv"), "source_id\toutput\n").unwrap();
    let out = perspectra(d, &["replay", eval_manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inputs changed"));
}

#[test]
fn curation_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--no-manifest", "demo", "--cases", "12", "--pretrain-epochs", "1", "--no-prompt-systems", "--variants", "base", "--export-corpus", "corpus.jsonl"]);
    ok(d, &["ingest", "corpus.jsonl", "--out", "store"]);
    ok(d, &["--store", "store", "mine-pairs", "--out", "pairs.jsonl"]);
    ok(d, &["--store", "store", "curate", "start", "--id", "iter-1", "--pairs", "pairs.jsonl", "--sessions", "cur"]);
    let out = perspectra(d, &["curate", "emit", "--id", "iter-1", "--sessions", "cur", "--out", "spec.json"]);
    assert_eq!(out.status.code(), Some(1), "incomplete session must not emit");
    for i in 0..5 {
        ok(d, &["curate", "select", "--id", "iter-1", "--sessions", "cur", "--item", &i.to_string(), "--candidate", "2"]);
    }
    let out = perspectra(d, &["curate", "select", "--id", "iter-1", "--sessions", "cur", "--item", "0", "--candidate", "3"]);
    assert_eq!(out.status.code(), Some(1));
    ok(d, &["curate", "emit", "--id", "iter-1", "--sessions", "cur", "--out", "spec.json"]);
    let spec: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["mode"], "iter");
    assert_eq!(spec["examples"].as_array().unwrap().len(), 5);
    ok(d, &["--store", "store", "rewrite-llm", "--pairs", "pairs.jsonl", "--mode", "iter", "--spec", "spec.json", "--out", "it.tsv", "--journal", "j.jsonl"]);
    assert!(std::fs::read_to_string(d.join("j.jsonl")).unwrap().lines().count() > 0);
}
