use std::fs;
use std::path::Path;
use std::process::Command;

fn lpp(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lpp")).args(args).output().expect("run lpp");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const CONSTANT: &str = "[field]\npreset = constant\nparams = 1.0\n[domain]\nl = 1.0\nb = 0.0\n\
                        [lattice]\nn_list = 10, 20\nseed_count = 2\n[solver]\nn_x = 10\nn_y = 40\n";

#[test]
fn success_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT);
    let out = dir.path().join("out");
    let (code, err) = lpp(&["theorem1", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code, 0, "{err}");
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 5);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn seed_count_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT);
    let out = dir.path().join("out");
    let (code, err) = lpp(&["lpp", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed-count", "5"]);
    assert_eq!(code, 0, "{err}");
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 11);
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lpp(&["theorem1", "--config", "/nonexistent.ini"]).0, 2);
    assert_eq!(lpp(&["theorem1"]).0, 2);
    let cfg = write_config(dir.path(), &CONSTANT.replace("b = 0.0", "b = 0.5"));
    assert_eq!(lpp(&["lpp", "--config", &cfg]).0, 2);
    let out = dir.path().join("out");
    let (code, err) = lpp(&["lpp", "--config", &cfg, "--auto-adjust-n", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONSTANT.replace("params = 1.0", "params = 0.0"));
    let out = dir.path().join("out");
    let (code, err) = lpp(&["tasep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}
