use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_anneal-lab"));
    cmd.env_remove("ANNEAL_LAB_OUT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SPECTRUM: &str = r#"
[instance]
sizes = [2, 3]
jzz_raw = 5.33

[catalyst]
sub_graph = 1
jxx = 0.3

[study]
kind = "spectrum"

[numerics.sweep]
grid_points = 41
"#;

#[test]
fn lists_every_preset() {
    let out = run(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sgs5", "wgs5", "sgs-scaling", "wgs-scaling", "no-ac", "tripartite-243", "diabatic-1000"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn show_expands_tripartite_sizes() {
    let out = run(&["show", "tripartite-243"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("sizes = [2, 4, 3]"));
}

#[test]
fn missing_sizes_exits_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[instance]\njzz_raw = 5.33\n[study]\nkind = \"spectrum\"\n");
    let out_dir = tmp.path().join("out");
    let out = run(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn dynamics_flags_on_other_study_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["run", "--preset", "no-ac", "--T", "10", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_preset_exits_one() {
    assert_eq!(run(&["run", "--preset", "nope"]).status.code(), Some(1));
}

#[test]
fn calibration_failure_exits_two_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cal.toml",
        "[instance]\nsizes = [3, 2]\ncalibrate_sx = 0.5\n[study]\nkind = \"spectrum\"\n[numerics.sweep]\ngrid_points = 41\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("diagnostics.json")).unwrap()).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("calibration"));
    assert!(!out_dir.join("summary.json").exists());
}

#[test]
fn env_var_sets_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.toml", SMALL_SPECTRUM);
    let out_dir = tmp.path().join("from-env");
    let out = bin().arg("run").arg(&cfg).env("ANNEAL_LAB_OUT", &out_dir).output().unwrap();
    assert!(out.status.success());
    assert!(out_dir.join("spectrum.csv").exists());
}

#[test]
fn manifest_round_trip_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.toml", SMALL_SPECTRUM);
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    assert!(run(&["run", &cfg, "--out", first.to_str().unwrap(), "--threads", "2"]).status.success());
    let manifest = first.join("manifest.json");
    let out = run(&["run", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut names: Vec<_> = std::fs::read_dir(&first)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        let a = std::fs::read(first.join(&name)).unwrap();
        let b = std::fs::read(second.join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn spectrum_csv_has_twelve_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.toml", SMALL_SPECTRUM);
    let dir = tmp.path().join("o");
    assert!(run(&["run", &cfg, "--out", dir.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    let first = row.split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 12, "{first}");
}
