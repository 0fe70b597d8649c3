use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[frontend]
num_channels = 16

[localization]
num_azimuths = 72
duration = 0.5

[evaluation]
folds = 3
scenes_per_fold = 2
evaluated_folds = [0]
scenarios = [2]
scene_duration = 1.0
classes = ["siren", "engine", "dog-bark"]

[evaluation.classifier.gmm]
components = 4
"#;

fn cass(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cass"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn selftest_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(cass(dir.path(), &["selftest", "--quick"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
}

#[test]
fn missing_bank_fails_with_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let out = cass(dir.path(), &["evaluate", "--bank", "nope.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-loc"));
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!cass(dir.path(), &["simulate", "--policy", "sideways"]).status.success());
    std::fs::write(dir.path().join("typo.toml"), "[frontnd]\n").unwrap();
    assert!(!cass(dir.path(), &["--config", "typo.toml", "selftest", "--quick"])
        .status
        .success());
    assert!(!cass(dir.path(), &["--config", "absent.toml", "selftest"])
        .status
        .success());
}

#[test]
fn train_simulate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    fn with<'a>(rest: &[&'a str]) -> Vec<&'a str> {
        [&["--config", "small.toml"][..], rest].concat()
    }

    ok(cass(d, &with(&["train-loc", "--out", "bank.json"])));
    ok(cass(d, &with(&["train-clf", "--out", "models.json"])));

    ok(cass(
        d,
        &with(&[
            "simulate", "--policy", "feedback", "--seed", "3", "--trace", "t.jsonl", "--wav", "s.wav",
        ]),
    ));
    let trace = std::fs::read_to_string(d.join("t.jsonl")).unwrap();
    let blocks: Vec<serde_json::Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(blocks.len(), 6);
    assert_eq!(blocks[0]["look_direction"], 90.0);
    assert_eq!(blocks[0]["sources"].as_array().unwrap().len(), 2);
    assert!(d.join("s.wav").metadata().unwrap().len() > 44_100);

    ok(cass(d, &with(&["evaluate", "--bank", "bank.json", "--out", "a.json"])));
    ok(cass(
        d,
        &with(&["evaluate", "--bank", "bank.json", "--out", "b.json", "--csv", "b.csv"]),
    ));
    let a = std::fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.json")).unwrap());
    let csv = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("scenario,sources,head_rotation"));

    // a different seed gives a different report
    ok(cass(
        d,
        &with(&["evaluate", "--bank", "bank.json", "--out", "c.json", "--seed", "9"]),
    ));
    assert_ne!(a, std::fs::read(d.join("c.json")).unwrap());

    // the bank no longer matches once the front-end changes
    let out = cass(d, &["simulate", "--bank", "bank.json", "--models", "models.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("different settings"));
}
