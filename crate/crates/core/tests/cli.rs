use std::path::PathBuf;
use std::process::Command;

fn sola() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sola"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = sola().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sola()
        .args(["--config", "does/not/exist.toml", "--quiet", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"linreg\"\nevents = \"many\"\n").unwrap();
    let out = sola().arg("--config").arg(&cfg).arg("--quiet").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_one_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diverge.toml");
    std::fs::write(
        &cfg,
        r#"
kind = "custom"
events = 400
mode = "naive"
signal = { kind = "owner" }

[custom]
diagonal = [1.0]
x0 = [1.0]

[[agents]]
id = 1
algorithm = "gd"
learning_rate = 3.0

[analysis]
regret = false
contraction = false
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = sola().arg("--config").arg(&cfg).arg("--out-dir").arg(&out_dir).arg("--quiet").output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("trace.csv").exists());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = sola()
            .arg("--config")
            .arg(configs().join("chatter_weighted.toml"))
            .args(["--seed", "7", "--quiet", "--out-dir"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        ["trace.csv", "regret.csv", "contraction.csv", "err.csv"].map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn naive_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = sola()
        .arg("--config")
        .arg(configs().join("chatter_weighted.toml"))
        .args(["--naive", "--quiet", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let alphas: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(!alphas.is_empty() && alphas.iter().all(|&a| a == 1.0));
}
