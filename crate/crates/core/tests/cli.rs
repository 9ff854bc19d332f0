use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nls_lab::runner::verify_manifest;

const EVOLVE: &str = r#"
[model]
q = 4.0
p = 4.5

[grid]
n = 256
L = 48.0

[profile]
kind = "gaussian"
mass = 0.5

[evolve]
model = "conformal"
t_max = 0.5
a_list = [0.6, 0.75]
snapshots = [0.25]
"#;

fn nls_lab(args: &[&str], dir: &Path, workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nls-lab"));
    cmd.args(args).current_dir(dir).env_remove("NLS_LAB_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("NLS_LAB_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path, prefix: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{prefix}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn evolve_writes_checksummed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ev.toml"), EVOLVE).unwrap();
    let out = nls_lab(&["evolve", "--config", "ev.toml", "--out", "run/a"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("run"), "a");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["subcommand"], "evolve");
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    for f in ["a.diagnostics.A0.6.csv", "a.diagnostics.A0.75.csv", "a.evolve.json", "a.snapshot.tau0.25.bin"] {
        assert!(files.contains(&f), "missing {f} in {files:?}");
    }
    assert!(verify_manifest(&dir.path().join("run/a.manifest.json")).unwrap());

    // tampering is detected
    let csv = dir.path().join("run/a.diagnostics.A0.6.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push('\n');
    fs::write(&csv, text).unwrap();
    assert!(!verify_manifest(&dir.path().join("run/a.manifest.json")).unwrap());
}

#[test]
fn outputs_are_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ev.toml"), EVOLVE).unwrap();
    let a = nls_lab(&["evolve", "--config", "ev.toml", "--out", "one", "--workers", "1"], dir.path(), None);
    let b = nls_lab(&["evolve", "--config", "ev.toml", "--out", "two"], dir.path(), Some("3"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let (ma, mb) = (manifest(dir.path(), "one"), manifest(dir.path(), "two"));
    assert_eq!(ma["workers"], 1);
    assert_eq!(mb["workers"], 3);
    let sums = |m: &serde_json::Value, prefix: &str| -> Vec<(String, String)> {
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| {
                let f = o["file"].as_str().unwrap().trim_start_matches(prefix).to_string();
                (f, o["sha256"].as_str().unwrap().to_string())
            })
            .collect()
    };
    assert_eq!(sums(&ma, "one"), sums(&mb, "two"));
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "grid.n = 100\nfoo.bar = 1\nmodel.q = 3.0\nmodel.p = 4.0\n").unwrap();
    let out = nls_lab(&["scatter", "--config", "bad.toml", "--out", "bad"], dir.path(), None);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.n"), "{err}");
    assert!(err.contains("foo.bar"), "{err}");
    assert!(err.contains("scattering regime requires q > 3"), "{err}");
    assert!(!dir.path().join("bad.manifest.json").exists());
}

#[test]
fn failed_run_removes_stale_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ev.toml"), EVOLVE).unwrap();
    let ok = nls_lab(&["evolve", "--config", "ev.toml", "--out", "x"], dir.path(), None);
    assert_eq!(ok.status.code(), Some(0));
    assert!(dir.path().join("x.manifest.json").exists());
    fs::write(dir.path().join("ev.toml"), "model.q = 4.0\nmodel.p = 4.5\n").unwrap();
    let bad = nls_lab(&["evolve", "--config", "ev.toml", "--out", "x"], dir.path(), None);
    assert_eq!(bad.status.code(), Some(3));
    assert!(!dir.path().join("x.manifest.json").exists());
}

#[test]
fn missing_config_and_bad_workers() {
    let dir = tempfile::tempdir().unwrap();
    let out = nls_lab(&["verify", "--config", "absent.toml"], dir.path(), None);
    assert_eq!(out.status.code(), Some(11));
    fs::write(dir.path().join("v.toml"), "model.q = 4.0\nmodel.p = 4.5\n").unwrap();
    let out = nls_lab(&["verify", "--config", "v.toml"], dir.path(), Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    let out = nls_lab(&["verify", "--config", "v.toml", "--workers", "0"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_and_uses_default_prefix() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.toml"), "model.q = 4.0\nmodel.p = 4.5\n").unwrap();
    let out = nls_lab(&["verify", "--config", "v.toml"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    let m = manifest(dir.path(), "nls-lab-verify");
    assert_eq!(m["status"], "ok");
    assert!(dir.path().join("nls-lab-verify.verify.csv").exists());
}
