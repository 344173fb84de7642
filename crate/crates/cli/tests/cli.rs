use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sot(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sot"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SOT_SEED")
        .output()
        .expect("binary runs")
}

fn sot_env(args: &[&str], cwd: &Path, seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sot"))
        .args(args)
        .current_dir(cwd)
        .env("SOT_SEED", seed)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn run_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A tiny dataset in `dir/data`.
fn tiny_dataset(dir: &Path) {
    fs::write(dir.join("data.json"), r#"{"dataset": {"n_examples": 10, "seed": 4}}"#).unwrap();
    let o = sot(&["gen-data", "--config", "data.json", "--out", "data"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_passes_on_a_correct_build() {
    let dir = tempfile::tempdir().unwrap();
    let o = sot(&["validate", "--out", "v"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{stdout}");
    assert_eq!(run_json(&dir.path().join("v/run.json"))["command"], "validate");
}

#[test]
fn sweep_zero_shift_row_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = sot(&["sweep", "--out", "out/sweep.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta_hz,ss,mss,sot_w2"));
    assert_eq!(lines.clone().count(), 81);
    assert!(lines.any(|l| l == "0,0,0,0"));
    let record = run_json(&dir.path().join("out/run.json"));
    assert_eq!(record["command"], "sweep");
    assert!(record["summary"]["spearman_abs_shift"]["sot_w2"].as_f64().unwrap() >= 0.99);
}

#[test]
fn gen_data_is_reproducible_and_leaves_its_config_alone() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let config_before = fs::read(dir.path().join("data.json")).unwrap();
    let o = sot(&["gen-data", "--config", "data.json", "--out", "again"], dir.path());
    assert_eq!(code(&o), 0);
    let a = fs::read(dir.path().join("data/manifest.jsonl")).unwrap();
    let b = fs::read(dir.path().join("again/manifest.jsonl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("data.json")).unwrap(), config_before);
    let record = run_json(&dir.path().join("data/run.json"));
    assert_eq!(record["seed"], 4);
    assert_eq!(record["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(fs::read_dir(dir.path().join("data/wav")).unwrap().count(), 10);
}

#[test]
fn seed_env_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"dataset": {"n_examples": 4, "seed": 1}}"#).unwrap();
    let o = sot_env(&["gen-data", "--config", "c.json", "--out", "d"], dir.path(), "77");
    assert_eq!(code(&o), 0);
    let record = run_json(&dir.path().join("d/run.json"));
    assert_eq!(record["seed"], 77);
    assert_eq!(record["seed_from_env"], true);
    assert_eq!(record["config"]["dataset"]["seed"], 77);
}

#[test]
fn estimate_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let args = |out: &'static str| {
        [
            "estimate", "--wav", "data/wav/ex00003.wav", "--variant", "SOT-512-LogF", "--seed", "11",
            "--steps", "15", "--out", out,
        ]
    };
    assert_eq!(code(&sot(&args("a/est.json"), dir.path())), 0);
    assert_eq!(code(&sot(&args("b/est.json"), dir.path())), 0);
    let a = fs::read(dir.path().join("a/est.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/est.json")).unwrap());
    let result: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(result["f0_frames"].as_array().unwrap().len(), 16);
    assert_eq!(result["config"]["variant"], "SOT-512-LogF");
    let record = run_json(&dir.path().join("a/run.json"));
    assert_eq!(record["seed"], 11);
    assert!(record["inputs"][0]["path"].as_str().unwrap().ends_with("ex00003.wav"));
}

#[test]
fn study_outputs_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.json"),
        r#"{"dataset": {"n_examples": 20},
            "estimator": {"max_steps": 4},
            "study": {"variants": ["SOT-512", "MSS-Lin"], "seeds": [0, 1]}}"#,
    )
    .unwrap();
    for (jobs, out) in [("1", "one"), ("3", "three")] {
        let o = sot(&["study", "--config", "s.json", "--out", out, "--jobs", jobs], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.csv", "study.csv", "table.md"] {
        let a = fs::read(dir.path().join("one").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("three").join(f)).unwrap(), "{f}");
    }
    let metrics = fs::read_to_string(dir.path().join("one/metrics.csv")).unwrap();
    assert!(metrics.starts_with("example_id,variant,seed,lsd,rpa,rca,od\n"));
    // 2 test examples x 2 variants x 2 seeds
    assert_eq!(metrics.lines().count(), 1 + 8);
    let study = fs::read_to_string(dir.path().join("one/study.csv")).unwrap();
    assert!(study.starts_with("variant,seed,metric,mean,std,median\n"));
}

#[test]
fn study_can_load_a_generated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    fs::write(
        dir.path().join("s.json"),
        r#"{"estimator": {"max_steps": 3}, "study": {"dataset_dir": "data", "seeds": [0], "variants": ["MSS-Lin"]}}"#,
    )
    .unwrap();
    let o = sot(&["study", "--config", "s.json", "--out", "st"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let record = run_json(&dir.path().join("st/run.json"));
    assert_eq!(record["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(record["summary"]["examples"], 1);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sot(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&sot(&[], dir.path())), 1);
    fs::write(dir.path().join("bad.json"), r#"{"dataset": {"n_exmples": 3}}"#).unwrap();
    let o = sot(&["gen-data", "--config", "bad.json", "--out", "x"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_exmples"));
    assert!(!dir.path().join("x").exists());
    let o = sot(
        &["estimate", "--wav", "a.wav", "--variant", "SOT-4096", "--out", "e.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    fs::write(dir.path().join("c.json"), "{}").unwrap();
    let o = sot_env(&["gen-data", "--config", "c.json", "--out", "y"], dir.path(), "seven");
    assert_eq!(code(&o), 1);
    assert_eq!(code(&sot(&["--help"], dir.path())), 0);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sot(
        &["estimate", "--wav", "missing.wav", "--variant", "MSS-Lin", "--out", "e.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    tiny_dataset(dir.path());
    // a corrupted waveform fails its checksum when loaded for a study
    let wav = dir.path().join("data/wav/ex00009.wav");
    let mut bytes = fs::read(&wav).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    fs::write(&wav, bytes).unwrap();
    fs::write(
        dir.path().join("s.json"),
        r#"{"estimator": {"max_steps": 2}, "study": {"dataset_dir": "data", "split": "train", "seeds": [0]}}"#,
    )
    .unwrap();
    let o = sot(&["study", "--config", "s.json", "--out", "st"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}
