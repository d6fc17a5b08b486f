use std::path::PathBuf;

use riesz_condenser::pipelines::{run, selftest, Fault};
use riesz_condenser::records::Check;
use riesz_condenser::scenario::{Resolution, Scenario};
use riesz_condenser::Error;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenarios().join(name)).unwrap();
    Scenario::parse(&text).unwrap()
}

#[test]
fn every_shipped_scenario_parses() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            Scenario::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 8);
}

#[test]
fn selftest_passes_and_catches_a_flipped_kernel() {
    let good = selftest(None);
    assert!(good.all_passed(), "{:#?}", good.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let bad = selftest(Some(Fault::FlipKernelSign));
    assert!(!bad.all_passed());
}

#[test]
fn sphere_capacity_pipeline_writes_its_records() {
    let out = run(&load("capacity_unit_sphere.toml"), Resolution::Medium).unwrap();
    assert!(out.all_passed());
    let dir = std::env::temp_dir().join(format!("rc-pipeline-{}", std::process::id()));
    out.write_to(&dir).unwrap();
    let lines = std::fs::read_to_string(dir.join("checks.jsonl")).unwrap();
    for line in lines.lines() {
        let c: Check = serde_json::from_str(line).unwrap();
        assert!(c.passed);
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "capacity");
    assert_eq!(summary["passed"], true);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn thinness_pipeline_classifies_the_shipped_profiles() {
    let out = run(&load("thinness_profiles.toml"), Resolution::Coarse).unwrap();
    assert!(out.all_passed());
}

#[test]
fn scenarios_needing_a_complement_say_so() {
    let text = r#"
command = "equilibrium"
[kernel]
alpha = 1.5
[plate]
shape = "disc"
radius_length = 1.0
center = [0.5, 0.0, 0.0]
[nodes]
coarse = 100
medium = 200
fine = 400
[domain]
kind = "half_space"
"#;
    match Scenario::parse(text) {
        Err(Error::Scenario { location, .. }) => assert_eq!(location, "complement"),
        other => panic!("{other:?}"),
    }
}
