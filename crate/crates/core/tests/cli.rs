use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crowdsense::scenarios::example1;

fn crowdsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdsense")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: &str = "\
# small road grid, short horizon
roads_h = 2
roads_v = 2
length_m = 150
width_m = 100
T = 60
B = 100
lambda = 0.4
interval_max = 10
";

fn write_tiny(dir: &Path) -> String {
    let path = dir.join("tiny.conf");
    fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn trace_examples_print_final_outcome() {
    let out = crowdsense(&["trace", "example1"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).trim_end().ends_with("S={1,4,5} payments 2,4,4"), "{}", stdout(&out));

    let out = crowdsense(&["trace", "example2"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).trim_end().ends_with("S={1,4} payments 8,8"), "{}", stdout(&out));
}

#[test]
fn trace_against_matching_expectation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expected.csv");
    fs::write(&path, example1().expected_trace_csv()).unwrap();
    let out = crowdsense(&["trace", "example1", "--expect", path.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
}

#[test]
fn corrupted_expectation_names_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expected.csv");
    let corrupted = example1().expected_trace_csv().replace("6,4,1/4,16,6,1;4,1:2;4:4", "6,4,1/4,16,7,1;4,1:3;4:4");
    assert_ne!(corrupted, example1().expected_trace_csv());
    fs::write(&path, corrupted).unwrap();
    let out = crowdsense(&["trace", "example1", "--expect", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("t=6"), "{err}");
}

#[test]
fn simulate_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = crowdsense(&[
            "simulate",
            "--config",
            &config,
            "--mechanism",
            "omg,prop_share",
            "--reps",
            "1",
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
        assert!(out_dir.join("manifest.json").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
        for artifact in manifest["artifacts"].as_array().unwrap() {
            assert!(out_dir.join(artifact.as_str().unwrap()).exists(), "{artifact}");
        }
        files.push(fs::read(out_dir.join("metrics.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 2, "{text}");
}

#[test]
fn calibrate_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdsense(&[
        "calibrate",
        "--model",
        "iid",
        "--omega",
        "5,100,1000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = fs::read_to_string(dir.path().join("calibration.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert!(rows[0].contains("false"), "omega 5 is infeasible: {}", rows[0]);
    assert!(rows[2].starts_with("1000"), "{}", rows[2]);
}

#[test]
fn verify_equivalence_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdsense(&["verify", "--suite", "equivalence", "-n", "10", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(!dir.path().join("repro-equivalence.txt").exists());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = crowdsense(&["simulate", "--config", "/nonexistent/crowdsense.conf"]);
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "T = 60\nbudget = 5\n").unwrap();
    let out = crowdsense(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    let out = crowdsense(&["trace", "no_such_example"]);
    assert!(!out.status.success());
}
