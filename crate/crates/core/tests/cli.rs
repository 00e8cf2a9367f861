use std::path::Path;
use std::process::{Command, Output};

fn nfbcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfbcs"))
        .args(args)
        .output()
        .unwrap()
}

fn write_small(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{
            "name": "small",
            "geometry": {"n_x": 2, "n_y": 3},
            "truth_perturbations": [{"descriptor": 2, "value": 0.5}],
            "prediction_grid": {"side": 6, "height": 3},
            "measurement": {"side": 6, "count_x": 4, "count_y": 4},
            "descriptors": {"standard": {"samples": 5}}
        }"#,
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_exports_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_small(tmp.path());
    let out = tmp.path().join("out");
    let o = nfbcs(&[
        "run",
        &scenario,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--snr",
        "30",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["snr_db"], 30.0);
    assert_eq!(report["trials"][0]["measurement"]["seed"], 3);
}

#[test]
fn sweeps_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_small(tmp.path());
    let out = tmp.path().to_str().unwrap();
    let o = nfbcs(&[
        "sweep-eta0",
        &scenario,
        "--out",
        out,
        "--eta0",
        "1e-4,1e-2",
        "--snr",
        "20,inf",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(tmp.path().join("sweep_eta0.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    let o = nfbcs(&[
        "sweep-snr",
        &scenario,
        "--out",
        out,
        "--snr",
        "20,40",
        "--trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(tmp.path().join("sweep_snr.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    let o = nfbcs(&[
        "sweep-truncation",
        &scenario,
        "--out",
        out,
        "--sides",
        "6,3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("sweep_truncation.csv").is_file());
    assert!(tmp.path().join("side_3/report.json").is_file());
}

#[test]
fn basis_save_then_load() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_small(tmp.path());
    let file = tmp.path().join("basis.bin");
    let o = nfbcs(&["basis", "save", &scenario, "--out", file.to_str().unwrap()]);
    assert!(o.status.success());
    let o = nfbcs(&["basis", "load", file.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("basis: 169 samples x 12 columns"));
}

#[test]
fn failures_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = nfbcs(&["run", missing.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"geometry": {"n_x": "six"}}"#).unwrap();
    let o = nfbcs(&["run", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.n_x"));

    let scenario = write_small(tmp.path());
    let o = nfbcs(&[
        "run",
        &scenario,
        "--eta0",
        "-1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("eta0"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let o = nfbcs(&["sweep-truncation", &scenario, "--sides", "0.1"]);
    assert!(!o.status.success());
}
