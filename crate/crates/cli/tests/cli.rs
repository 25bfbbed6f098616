use std::path::{Path, PathBuf};
use std::process::Command;

use splitlab::experiments::{
    csv_header, BlendRow, CalibrationRow, CompareRow, ConditionRow, ConvexityRow, DominanceCsvRow, PowerRow,
};
use splitlab::reproduce::Check;
use splitlab::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splitlab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap().trim_end().to_string()
}

#[test]
fn csv_headers_match_golden_files() {
    let cases = [
        ("power_curve.csv", csv_header(&PowerRow::default()).unwrap()),
        ("dominance.csv", csv_header(&DominanceCsvRow::default()).unwrap()),
        ("calibrate_np.csv", csv_header(&CalibrationRow::default()).unwrap()),
        ("blend_search.csv", csv_header(&BlendRow::default()).unwrap()),
        ("condition_check.csv", csv_header(&ConditionRow::default()).unwrap()),
        ("gaussian_d_compare.csv", csv_header(&CompareRow::default()).unwrap()),
        ("convexity_demo.csv", csv_header(&ConvexityRow::default()).unwrap()),
        (
            "criterion.csv",
            csv_header(&Check {
                criterion: 0,
                check: String::new(),
                value: 0.0,
                target: String::new(),
                passed: false,
            })
            .unwrap(),
        ),
    ];
    for (file, header) in cases {
        assert_eq!(header, golden(file), "{file}");
    }
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert_eq!(count, 7);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn condition_check_run_reports_satisfied_for_gaussian() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--quiet", "--config"])
        .arg(configs().join("condition_check.toml"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("condition_check.json")).unwrap()).unwrap();
    assert_eq!(json["check"]["verdict"], "evidence_satisfied");
    assert_eq!(json["claim"]["inadmissible"], true);
}

#[test]
fn dominance_run_is_strict_at_one_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
schema_version = 1
experiment = "dominance"
seed = 99
n_samples = 200000

[[tests]]
kind = "z_two_sided"

[[tests]]
kind = "moran_1d"

[grid]
theta = [0.0, 1.0]
"#,
    );
    let mut bodies = Vec::new();
    for (i, workers) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let status = bin()
            .env("SPLITLAB_WORKERS", workers)
            .args(["run", "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        bodies.push(std::fs::read_to_string(out.join("dominance.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let at_one = bodies[0].lines().find(|l| l.starts_with("1,")).unwrap();
    assert!(at_one.ends_with(",true"), "{at_one}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nexperiment = \"calibrate-np\"\nseed = 1\nn_samples = 20000\n\n[prior]\natoms = [{ theta = [1.0], weight = 1.0 }]\n",
    );
    let mut bodies = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let status = bin()
            .args(["run", "--quiet", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        bodies.push(std::fs::read(out.join("calibrate_np.csv")).unwrap());
    }
    assert_ne!(bodies[0], bodies[1]);
}

#[test]
fn malformed_alpha_exits_two_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("dominance.toml"))
        .unwrap()
        .replace("alpha = 0.05", "alpha = 1.5");
    let cfg = write_config(dir.path(), &text);
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "{err}");
}

#[test]
fn tiny_sample_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("dominance.toml"))
        .unwrap()
        .replace("n_samples = 1000000", "n_samples = 500");
    let cfg = write_config(dir.path(), &text);
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples"));
}

#[test]
fn numerical_failures_exit_three() {
    // a grid box that captures too little null mass
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nexperiment = \"calibrate-np\"\nseed = 1\nn_samples = 20000\n\n[prior]\natoms = [{ theta = [1.0], weight = 1.0 }]\n\n[oracle]\nlo = -1.0\nhi = 1.0\ncells = 20\n",
    );
    let out = bin()
        .args(["run", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
