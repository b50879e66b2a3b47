use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const QBM: &str = env!("CARGO_BIN_EXE_qbm");

const SMALL: &str = "\
[coefficients]
m = 1.0
p = 1.0
q = 0.0
r = 0.05
s = 0.02

[grid]
x_min = -6.0
x_max = 6.0
nx = 41
y_min = -6.0
y_max = 6.0
ny = 41

[solver]
dt = 2e-3
t_end = 0.1
stride = 10
";

fn run(args: &[&str]) -> Output {
    Command::new(QBM)
        .args(args)
        .env_remove("QBM_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("c.cfg");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn assert_valid(schema: &str, file: &Path) {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(schema_dir().join(schema)).unwrap()).unwrap();
    let doc: Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v
        .iter_errors(&doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(
        errors.is_empty(),
        "{} against {schema:?}: {errors:?}",
        file.display()
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn conservation_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "verify",
        "--what",
        "conservation",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rep = out.join("verify_conservation.json");
    assert_valid("verify_conservation.schema.json", &rep);
    assert_valid("run_manifest.schema.json", &out.join("run_manifest.json"));
    let v = json(&rep);
    assert!(v["initial_mass"].as_f64().unwrap() > 0.0);
    assert!(v["relative_drift"].as_f64().unwrap() < 1e-6);
    assert!(o.stdout.is_empty());
}

#[test]
fn solve2d_snapshots_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["solve2d", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_valid("solve2d.schema.json", &out.join("solve2d.json"));
    let rep = json(&out.join("solve2d.json"));
    let snaps = rep["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 6);
    assert_valid(
        "field2d_sidecar.schema.json",
        &out.join("snapshots/z2d_00005.json"),
    );
    let manifest = json(&out.join("run_manifest.json"));
    assert_eq!(manifest["files"].as_array().unwrap().len(), 13);
    let csv = fs::read_to_string(out.join("snapshots/z2d_00000.csv")).unwrap();
    assert!(csv.starts_with("# t=0"));
}

#[test]
fn bracket_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "bracket",
        "--set",
        "constant",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[Y1, X1] = +1.000000000000e0 X1"), "{text}");
    assert_eq!(text, fs::read_to_string(out.join("bracket.txt")).unwrap());
    assert_valid("bracket.schema.json", &out.join("bracket.json"));
    assert_eq!(
        json(&out.join("bracket.json"))["entries"]
            .as_array()
            .unwrap()
            .len(),
        15
    );
}

#[test]
fn unknown_set_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&[
        "bracket",
        "--set",
        "general",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = run(&["integrate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_profile_named_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("q = 0.0\n", ""));
    let o = run(&[
        "solve2d",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("coefficients.q"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn duplicate_key_lines_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("dt = 2e-3", "dt = 2e-3\ndt = 1e-3"),
    );
    let o = run(&["solve2d", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 17") && err.contains("line 18"), "{err}");
}

#[test]
fn env_override_and_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}\n[output]\ndir = \"from-config\"\n"),
    );
    let o = run(&["verify", "--what", "conservation", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir
        .path()
        .join("from-config/verify_conservation.json")
        .exists());

    let env_dir = dir.path().join("from-env");
    let o = Command::new(QBM)
        .args(["verify", "--what", "conservation", "--config", &cfg])
        .env("QBM_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("verify_conservation.json").exists());
}

#[test]
fn ermakov_report_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = run(&[
        "ermakov",
        "--omega2",
        "exp:0.5",
        "--K",
        "0.4",
        "--rho0",
        "1",
        "--drho0",
        "0.1",
        "--t1",
        "0.5",
        "--dt",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_valid("ermakov.schema.json", &out.join("ermakov.json"));
    let csv = fs::read_to_string(out.join("ermakov.csv")).unwrap();
    assert_eq!(csv.lines().count(), 502);
}

#[test]
fn ermakov_rejects_nonpositive_rho0() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "ermakov",
        "--omega2",
        "const:0",
        "--K",
        "1",
        "--rho0",
        "-1",
        "--drho0",
        "0",
        "--t1",
        "1",
        "--dt",
        "1e-3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn symmetry_and_roundtrip_reports_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for what in ["symmetry", "roundtrip"] {
        let out = dir.path().join(what);
        let o = run(&[
            "verify",
            "--what",
            what,
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        let code = o.status.code();
        assert!(
            code == Some(0) || code == Some(2),
            "{what}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let rep = out.join(format!("verify_{what}.json"));
        assert_valid(&format!("verify_{what}.schema.json"), &rep);
        let verdict = json(&rep)["verdict"].as_str().unwrap().to_string();
        assert_eq!(code == Some(2), verdict == "failed");
    }
}

#[test]
fn reduction_without_w_grid_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&[
        "reduce",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.w_min"));
}

#[test]
fn ill_posed_reduction_is_a_contract_error() {
    // These coefficients give a negative reduced diffusion.
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("ny = 41", "ny = 41\nw_min = -20.0\nw_max = 20.0\nnw = 81");
    let cfg = write_config(dir.path(), &text);
    let o = run(&[
        "reduce",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ill-posed"));
}

#[test]
fn reduce_writes_snapshots_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
[coefficients]
m = 1.0
p = 1.0
q = 0.2
r = 0.01
s = 0.1

[grid]
x_min = -4.0
x_max = 4.0
nx = 21
y_min = -4.0
y_max = 4.0
ny = 21
w_min = -12.0
w_max = 12.0
nw = 61

[solver]
dt = 2e-3
t_end = 0.1
stride = 10
";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("r");
    let o = run(&["reduce", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let code = o.status.code();
    assert!(
        code == Some(0) || code == Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_valid("reduction.schema.json", &out.join("reduce.json"));
    assert_valid(
        "field1d_sidecar.schema.json",
        &out.join("reduced/u1d_00000.json"),
    );
    assert!(out.join("reconstructed/z2d_00005.csv").exists());
}
