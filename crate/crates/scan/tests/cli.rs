use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nanosqueeze"));
    c.env("RUST_LOG", "warn");
    c
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"{"name": "small", "pipeline": "amplitude_map",
    "geometry": {"radius_nm": {"values": [40, 60]}, "detector": {"kind": "d1"}},
    "emitter": {"lambda_nm": {"start": 520, "stop": 580, "points": 3}, "s_nm": 10}}"#;

#[test]
fn validate_accepts_every_preset() {
    for entry in std::fs::read_dir(presets_dir()).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(
            code(&out),
            0,
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"name": "x", "pipeline": "nope"}"#,
    );
    assert_eq!(code(&bin().arg("validate").arg(&bad).output().unwrap()), 1);
    assert_eq!(code(&bin().arg("run").arg(&bad).output().unwrap()), 1);
    assert_eq!(code(&bin().args(["preset", "fig9"]).output().unwrap()), 1);
    let good = write(dir.path(), "small.json", SMALL);
    assert_eq!(
        code(
            &bin()
                .arg("run")
                .arg(&good)
                .args(["--threads", "0"])
                .output()
                .unwrap()
        ),
        1
    );
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 1);
}

#[test]
fn io_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&bin().arg("validate").arg(&missing).output().unwrap()),
        3
    );
    let good = write(dir.path(), "small.json", SMALL);
    let blocker = write(dir.path(), "blocker", "");
    let out = bin()
        .arg("run")
        .arg(&good)
        .arg("--out-dir")
        .arg(&blocker)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn run_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "small.json", SMALL);
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&good)
        .arg("--out-dir")
        .arg(&out_dir)
        .args([
            "--format",
            "csv",
            "--format",
            "svg",
            "--threads",
            "2",
            "--tol",
            "1e-8",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("small.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let svg = std::fs::read_to_string(out_dir.join("small.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!out_dir.join("small.json").exists());
    let names: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 2, "no temporary files left behind: {names:?}");
}

#[test]
fn numerical_failures_exit_with_two_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let hard = write(
        dir.path(),
        "hard.json",
        r#"{"name": "hard", "pipeline": "amplitude_map",
            "geometry": {"radius_nm": {"values": [200, 0]}, "detector": {"kind": "d2", "offset_nm": 1}},
            "emitter": {"lambda_nm": 550, "s_nm": 1},
            "numerics": {"mode": "far_field", "series_tol": 1e-12, "max_order": 20}}"#,
    );
    let out = bin()
        .arg("run")
        .arg(&hard)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let csv = std::fs::read_to_string(dir.path().join("hard.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",convergence"));
    assert!(csv.lines().nth(2).unwrap().ends_with(','));
}
