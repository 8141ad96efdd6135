use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fglr::data_model::{write_dataset, Observation};
use fglr::synthetic::{generate, SyntheticConfig};

fn fglr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fglr"))
        .args(args)
        .env_remove("FGLR_SERVICE_URL")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    data: PathBuf,
}

fn fixture(per_class: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let data = root.join("data.jsonl");
    let obs: Vec<Observation> = generate(&SyntheticConfig {
        per_class,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .into_iter()
    .map(|e| e.observation)
    .collect();
    write_dataset(&data, &obs).unwrap();
    Fixture { _dir: dir, root, data }
}

fn train(f: &Fixture, name: &str, extra: &[&str]) -> PathBuf {
    let out = f.root.join(name);
    let mut args = vec!["train", "--data", s(&f.data), "--out", s(&out), "--seed", "7"];
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "10"]);
    }
    args.extend_from_slice(extra);
    let o = fglr(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn eval_reports_accuracy_on_small_fixture() {
    let f = fixture(1);
    let ckpt = train(&f, "m.json", &[]);
    let o = fglr(&["eval", "--data", s(&f.data), "--checkpoint", s(&ckpt)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["count"], 3);
    assert!(report["accuracy"].is_f64());
    assert!(f.root.join("m.json.log.csv").exists());
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let f = fixture(5);
    let a = train(&f, "a.json", &[]);
    let b = train(&f, "b.json", &[]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn config_file_and_flags_combine() {
    let f = fixture(2);
    let cfg = f.root.join("train.toml");
    std::fs::write(&cfg, "hidden = 4\nlearning_rate = 0.01\n").unwrap();
    let ckpt = train(&f, "m.json", &["--config", s(&cfg)]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(ckpt).unwrap()).unwrap();
    assert_eq!(json["h"], 4);
    assert_eq!(json["seed"], 7);

    std::fs::write(&cfg, "hiden = 4\n").unwrap();
    let o = fglr(&["train", "--data", s(&f.data), "--out", s(&f.root.join("x.json")), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_agrees_with_eval_and_explain_names_facts() {
    let f = fixture(20);
    let ckpt = train(&f, "m.json", &["--epochs", "20"]);
    let preds = f.root.join("p.jsonl");
    let o = fglr(&["predict", "--data", s(&f.data), "--checkpoint", s(&ckpt), "--out", s(&preds)]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 60);
    let correct = lines.iter().filter(|l| l["predicted"] == l["gold"]).count();

    let o = fglr(&["eval", "--data", s(&f.data), "--checkpoint", s(&ckpt)]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracy"].as_f64().unwrap(), correct as f64 / 60.0);

    let entailed = lines
        .iter()
        .find(|l| l["predicted"] == "entailment")
        .expect("an entailment prediction");
    let id = entailed["id"].as_str().unwrap();
    let o = fglr(&[
        "explain", "--data", s(&f.data), "--checkpoint", s(&ckpt), "--id", id, "--format", "json",
    ]);
    assert!(o.status.success());
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let facts = e["responsible_facts"].as_array().unwrap();
    assert!(!facts.is_empty());
    for fact in facts {
        assert_eq!(fact["head"], "entailment");
        assert!(fact["raw_attention"].as_f64().unwrap() > 0.5);
    }

    let o = fglr(&["explain", "--data", s(&f.data), "--checkpoint", s(&ckpt), "--id", id]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("predicted entailment"));
    assert!(text.contains("responsible facts:"));
}

#[test]
fn commands_do_not_modify_inputs() {
    let f = fixture(2);
    let before = std::fs::read(&f.data).unwrap();
    let ckpt = train(&f, "m.json", &[]);
    let ckpt_before = std::fs::read(&ckpt).unwrap();
    for cmd in ["eval", "predict", "explain"] {
        let o = fglr(&[cmd, "--data", s(&f.data), "--checkpoint", s(&ckpt)]);
        assert!(o.status.success(), "{cmd}");
    }
    assert_eq!(std::fs::read(&f.data).unwrap(), before);
    assert_eq!(std::fs::read(&ckpt).unwrap(), ckpt_before);
}

#[test]
fn usage_errors_exit_two_before_io() {
    let f = fixture(1);
    let out = f.root.join("never.json");
    let o = fglr(&["train", "--data", s(&f.data), "--out", s(&out), "--facts-strategy", "hypcond"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = fglr(&["generate-facts", "--data", s(&f.data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    assert_eq!(fglr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fglr(&["eval", "--data", "x", "--checkpoint", "y", "--threshold", "1.5"]).status.code(), Some(2));
    assert_eq!(fglr(&["--help"]).status.code(), Some(0));
    assert_eq!(fglr(&["eval", "--data", "x"]).status.code(), Some(2));
}

#[test]
fn malformed_input_reports_line() {
    let f = fixture(1);
    let bad = f.root.join("bad.jsonl");
    let mut text = std::fs::read_to_string(&f.data).unwrap();
    text.push_str("{not json}\n");
    std::fs::write(&bad, text).unwrap();
    let o = fglr(&["train", "--data", s(&bad), "--out", s(&f.root.join("m.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.jsonl:4"), "{err}");
}

#[test]
fn offline_generation_from_cache() {
    use fglr::generator_client::{FactGenerator, GenerationCache, GenerationConfig, MockService, TemplateSet};
    let f = fixture(1);
    let cache_path = f.root.join("cache.jsonl");
    // Fill the cache through the library with a mock service, then run the
    // binary offline against it.
    let data = fglr::data_model::load_dataset(&f.data, fglr::data_model::Split::Eval).unwrap();
    {
        let service = MockService::new(|_| Ok("1. first fact\n2. second fact".into()));
        let cache = GenerationCache::open(&cache_path).unwrap();
        let generator = FactGenerator::new(TemplateSet::builtin(), &service, &cache, GenerationConfig::default());
        generator
            .augment_dataset(&data, fglr::FactStrategy::FactComb, fglr::Split::Eval, 2)
            .unwrap();
    }
    let out = f.root.join("aug.jsonl");
    let o = fglr(&[
        "generate-facts", "--data", s(&f.data), "--out", s(&out), "--cache", s(&cache_path), "--offline",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let aug = fglr::data_model::load_dataset(&out, fglr::data_model::Split::Eval).unwrap();
    assert_eq!(aug.len(), 3);
    assert!(aug[0].fact_texts().any(|t| t == "first fact"));
    assert_eq!(aug[0].label, data[0].label);

    // a strategy whose prompts are not cached fails offline
    let o = fglr(&[
        "generate-facts", "--data", s(&f.data), "--out", s(&out), "--cache", s(&cache_path), "--offline",
        "--facts-strategy", "hypcond",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cache miss"));
}
