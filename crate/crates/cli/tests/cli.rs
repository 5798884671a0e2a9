use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_telehaptic"));
    c.env_remove("TELEHAPTIC_OUT");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn print_schema() {
    let o = bin().arg("--print-schema").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("queue_capacity_bytes"));
}

#[test]
fn list_names_every_preset() {
    let o = bin().arg("list").output().unwrap();
    assert_eq!(code(&o), 0);
    for n in telehaptic::presets::NAMES {
        assert!(stdout(&o).contains(n), "{n}");
    }
}

#[test]
fn passing_scenario_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--scenario"])
        .arg(scenarios().join("uncongested.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("uncongested");
    for f in ["samples.csv", "k.csv", "queue.csv", "summary.csv", "scenario.toml"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let checks = std::fs::read_to_string(dir.path().join("checks.txt")).unwrap();
    assert!(checks.starts_with("PASS"));
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // no merging under heavy congestion cannot meet the delay limit
    let o = bin()
        .args(["run", "--scenario"])
        .arg(scenarios().join("congested.toml"))
        .args(["--set", "protocol=no_merge", "--set", "r_cbr=400", "--set", "duration_ms=3000"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["run".into(), "--preset".into(), "fig99".into()],
        vec!["run".into(), "--scenario".into(), "/does/not/exist.toml".into()],
        vec!["run".into(), "--preset".into(), "fig10".into(), "--set".into(), "nonsense=1".into()],
        vec!["run".into(), "--preset".into(), "fig10".into(), "--set".into(), "k_max=9".into()],
        vec!["run".into()],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let o = bin().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(code(&o), 2, "{args:?}");
    }
}

#[test]
fn env_sets_output_root_and_sweep_sorts() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("TELEHAPTIC_OUT", dir.path())
        .args(["sweep", "--scenario"])
        .arg(scenarios().join("congested.toml"))
        .args(["--set", "duration_ms=2000", "--param", "r_cbr", "--values", "300,0,100"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("congested/sweep_r_cbr.csv")).unwrap();
    let values: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let mut dedup = values.clone();
    dedup.dedup();
    assert_eq!(dedup, ["0", "100", "300"]);
    // DPM keeps every telehaptic packet at these levels
    for l in csv.lines().filter(|l| l.contains(",telehaptic_")) {
        assert_eq!(l.split(',').nth(6), Some("0"), "{l}");
    }
}

#[test]
fn empty_sweep_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["sweep", "--scenario"])
        .arg(scenarios().join("uncongested.toml"))
        .args(["--param", "seed", "--values", ""])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep_seed.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = bin()
            .args(["run", "--scenario"])
            .arg(scenarios().join("congested.toml"))
            .args(["--set", "duration_ms=3000", "--seed", "9", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
    }
    for f in ["samples.csv", "k.csv", "queue.csv", "summary.csv"] {
        let x = std::fs::read(a.path().join("congested").join(f)).unwrap();
        let y = std::fs::read(b.path().join("congested").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}
