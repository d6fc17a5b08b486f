use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riesz-condenser"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rc-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn capacity_run_writes_records_and_exits_zero() {
    let out = scratch("capacity");
    let o = bin()
        .args(["capacity", "--resolution", "coarse", "--scenario"])
        .arg(scenario("capacity_unit_disc_closed_form.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("checks passed"));
    let jsonl = std::fs::read_to_string(out.join("checks.jsonl")).unwrap();
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["passed"], true);
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["resolution"], "coarse");
    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    for e in csvs {
        let text = std::fs::read_to_string(e.path()).unwrap();
        assert!(!text.contains('\r'));
    }
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn failing_check_exits_one() {
    let out = scratch("target");
    let o = bin()
        .args(["capacity", "--resolution", "coarse", "--scenario"])
        .arg(scenario("capacity_unit_disc.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    assert!(out.join("checks.jsonl").exists());
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn malformed_scenario_exits_two_and_writes_nothing() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "command = \"capacity\"\n[kernel]\nalpha = 2.0\nbogus = 1\n").unwrap();
    let out = dir.join("out");
    let o = bin().args(["capacity", "--scenario"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert!(!out.exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scenario_for_another_command_is_refused() {
    let out = scratch("mismatch");
    let o = bin()
        .args(["balayage", "--scenario"])
        .arg(scenario("thinness_profiles.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("thinness"));
    assert!(!out.exists());
}

#[test]
fn bad_thread_count_is_an_error() {
    let o = bin().env("RC_THREADS", "zero").arg("selftest").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes_on_one_thread() {
    let out = scratch("selftest");
    let o = bin().env("RC_THREADS", "1").args(["selftest", "--out"]).arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("summary.json").exists());
    std::fs::remove_dir_all(&out).unwrap();
}
