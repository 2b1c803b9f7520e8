use std::path::Path;
use std::process::{Command, Output};

fn driftlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlab"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("DRIFTLAB_SEED")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_writes_a_full_stream_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "3", "generate", "--pattern", "ABA", "--b", "50", "--dataset", "stagger"];
    let a = driftlab(&[&args[..], &["-o", "a.jsonl"]].concat(), dir.path());
    let b = driftlab(&[&args[..], &["-o", "b.jsonl"]].concat(), dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success());
    let first = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(first.lines().count(), 1600);
    assert_eq!(first, std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap());
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.jsonl.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["change_points"].as_array().unwrap().len(), 2);
}

#[test]
fn generate_without_pattern_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = driftlab(&["generate", "-o", "x.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_reports_events() {
    let dir = tempfile::tempdir().unwrap();
    let gen = driftlab(&["--seed", "4", "generate", "--pattern", "AB", "-o", "s.jsonl"], dir.path());
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = driftlab(&["--seed", "4", "detect", "s.jsonl", "-o", "d.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert!(v["events"].is_array());
    assert_eq!(v["method"], "sddm-mt");
}

#[test]
fn detect_rejects_corrupt_input_and_unknown_methods() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"t\": 0, \"x\": [1.0]}\nnot json\n").unwrap();
    assert_eq!(driftlab(&["detect", "bad.jsonl"], dir.path()).status.code(), Some(1));

    std::fs::write(dir.path().join("ok.jsonl"), "{\"t\": 0, \"x\": [1.0]}\n").unwrap();
    let out = driftlab(&["detect", "ok.jsonl", "--method", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_with_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("b.toml"),
        "n_runs = 2\nalignment_runs = 1\nmethods = [\"oracle\"]\npatterns = [\"AB\"]\ndatasets = [{ family = \"stagger\" }]\n",
    )
    .unwrap();
    let out = driftlab(&["--seed", "1", "benchmark", "--config", "b.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| l.starts_with('|')).collect();
    assert_eq!(rows.len(), 3, "{table}");
    assert!(rows[2].contains("1.00"));
    assert!(dir.path().join("benchmark.csv").exists());
    assert!(dir.path().join("benchmark.json").exists());
}

#[test]
fn benchmark_config_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.toml"), "n_runs = 2\nbogus_key = 1\n").unwrap();
    let out = driftlab(&["benchmark", "--config", "b.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus_key"), "{}", stderr(&out));
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        r#"{"n_runs": 1, "alignment_runs": 1, "methods": ["oracle"], "patterns": ["ABC"], "b_lengths": [25], "datasets": [{"family": "stagger"}]}"#,
    )
    .unwrap();
    let out = driftlab(&["benchmark", "--config", "b.json", "--prefix", "j"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("j.csv").exists());
}

#[test]
fn verify_spectral_passes_and_fails_on_impossible_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let ok = driftlab(&["verify-spectral", "--cases", "10"], dir.path());
    assert!(ok.status.success(), "{}", stderr(&ok));
    let strict = driftlab(&["verify-spectral", "--cases", "10", "--tolerance", "1e-20"], dir.path());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env_seed: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_driftlab"));
        cmd.current_dir(dir.path()).env_remove("DRIFTLAB_SEED").env("RUST_LOG", "warn");
        if let Some(s) = env_seed {
            cmd.env("DRIFTLAB_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        let status = cmd.args(["generate", "--pattern", "ABC", "--b", "25", "-o", name]).status().unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let env = run("env.jsonl", Some("77"), None);
    let flag = run("flag.jsonl", None, Some("77"));
    let other = run("other.jsonl", Some("78"), None);
    let both = run("both.jsonl", Some("78"), Some("77"));
    assert_eq!(env, flag);
    assert_ne!(env, other);
    assert_eq!(both, flag);
}

#[test]
fn export_eigen_writes_basis() {
    let dir = tempfile::tempdir().unwrap();
    assert!(driftlab(&["--seed", "2", "generate", "--pattern", "AB", "-o", "s.jsonl"], dir.path())
        .status
        .success());
    let out = driftlab(
        &["export-eigen", "s.jsonl", "--kernel", "rbf", "--n-eigen", "3", "--start", "500", "--len", "200", "-o", "e.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,v0,v1,v2");
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(driftlab(&[], dir.path()).status.code(), Some(2));
}
