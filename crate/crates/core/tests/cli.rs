use std::path::Path;
use std::process::Command;

use spatial_entry::scenario::{CaseKind, ResultsFile, Status};

const BIN: &str = env!("CARGO_BIN_EXE_spatial-entry");

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "id = \"small\"
n_max = 2
market_sizes = [60.0, 250.0]
consumer_resolution = 16
location_resolution = 9
first_pass_resolution = 5

[outputs]
svg = true
csv = true
";

#[test]
fn bad_resolution_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "id = \"bad\"\nconsumer_resolution = 4\n");
    let out = Command::new(BIN).arg("--config").arg(&cfg).arg("--out-dir").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("consumer_resolution"), "{err}");
    assert!(err.contains("line 2"), "{err}");
    assert!(!dir.path().join("out").join("results.json").exists());
}

#[test]
fn unknown_flag_value_exits_2() {
    let out = Command::new(BIN).args(["--sweep", "10:5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let status = Command::new(BIN)
            .arg("--config")
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out_dir)
            .args(["--threads", threads])
            .output()
            .unwrap()
            .status;
        assert_eq!(status.code(), Some(0));
        outputs.push(out_dir);
    }
    for name in ["results.json", "profits.csv", "figures/fig_1_just_entered.svg"] {
        let a = std::fs::read(outputs[0].join(name)).unwrap();
        let b = std::fs::read(outputs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
    let text = std::fs::read_to_string(outputs[0].join("results.json")).unwrap();
    let file = ResultsFile::from_json(&text).unwrap();
    assert_eq!(file.to_json(), text);
    assert_eq!(file.records.len(), 4);
    assert!(file.records.iter().all(|r| r.kind == CaseKind::Sequential));
    assert_eq!(file.records[2].status, Status::Infeasible);
    let duo = &file.records[3];
    assert_eq!(duo.status, Status::Ok);
    assert_eq!(duo.result().unwrap().configuration.len(), 2);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let status = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--n", "1", "--market-size", "40,80"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let file = ResultsFile::from_json(&std::fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let sizes: Vec<f64> = file.records.iter().map(|r| r.market_size).collect();
    assert_eq!(sizes, vec![40.0, 80.0]);
    assert!(file.records.iter().all(|r| r.n == 1));
}

#[test]
fn unbracketed_threshold_exits_3_and_still_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "id = \"nobracket\"\nn_max = 1\nthresholds = true\nthreshold_range = [1000.0, 2000.0]\nconsumer_resolution = 16\n",
    );
    let out_dir = dir.path().join("out");
    let out = Command::new(BIN).arg("--config").arg(&cfg).arg("--out-dir").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    let file = ResultsFile::from_json(&std::fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert!(file.records.iter().all(|r| r.status == Status::Failed && r.message.is_some()));
}
