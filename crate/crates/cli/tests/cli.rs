use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn diffloc(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_diffloc")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "diffloc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A two-frequency sweep on a coarse grid so the tests stay quick.
fn small_config(dir: &Path) -> String {
    let out = diffloc(&["scene"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let text = text
        .replacen("spacing = 2.0", "spacing = 5.0", 1)
        .replacen("trials = 4", "trials = 1", 1);
    let path = dir.join("sweep.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn scene_prints_parseable_config() {
    let out = diffloc(&["scene"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("frequencies_hz"));
    assert!(text.contains("[scene.building]"));
    assert!(text.contains("spacing = 2.0"));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    diffloc(&["sweep", "-c", &cfg, "-o", a.to_str().unwrap()]);
    diffloc(&["sweep", "-c", &cfg, "-o", b.to_str().unwrap(), "--sequential"]);
    for f in ["p_fap.csv", "fap_snr.csv", "errors.csv", "cdf.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exported_dataset_ingests_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("mpcs.jsonl");
    let out = diffloc(&[
        "scene",
        "-c",
        &cfg,
        "-o",
        dir.path().join("echo.toml").to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
        "--frequency",
        "28e9",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("records"));
    let lines = fs::read_to_string(&data).unwrap().lines().count();
    assert!(lines > 0);

    let fap_dir = dir.path().join("fap");
    let out = diffloc(&["ingest", data.to_str().unwrap(), "-o", fap_dir.to_str().unwrap()]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.starts_with(&format!("{lines} records accepted, 0 rejected")),
        "{stdout}"
    );
    assert!(stdout.contains("MPC3"));
    let rows = fs::read_to_string(fap_dir.join("fap.csv")).unwrap();
    assert!(rows.starts_with("anchor_id,rx_id,group"));
}

#[test]
fn ingest_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.jsonl");
    fs::write(
        &data,
        concat!(
            r#"{"schema":1,"anchor_id":0,"rx_id":0,"rx_xyz":[1.0,2.0,3.0],"interactions":"Tx-D-T-Rx","path_length_m":20.0,"rx_power_dbm":-70.0}"#,
            "\n",
            r#"{"schema":1,"anchor_id":0,"rx_id":0,"rx_xyz":[1.0,2.0,3.0],"interactions":"Tx-D-X-Rx","path_length_m":21.0,"rx_power_dbm":-71.0}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = diffloc(&["ingest", data.to_str().unwrap()]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("1 records accepted, 1 rejected"));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
}

#[test]
fn report_rewrites_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    diffloc(&["sweep", "-c", &cfg, "-o", first.to_str().unwrap()]);
    diffloc(&[
        "report",
        "--from",
        first.to_str().unwrap(),
        "-o",
        second.to_str().unwrap(),
    ]);
    for f in ["p_fap.csv", "fap_snr.csv", "errors.csv", "cdf.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn rejects_missing_config() {
    let out = Command::new(env!("CARGO_BIN_EXE_diffloc"))
        .args(["sweep", "-c", "/nonexistent/sweep.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading"));
}
