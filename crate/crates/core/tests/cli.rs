use std::path::Path;
use std::process::{Command, Output};

use overdet_core::geometry::Mesh;
use serde_json::Value;

fn lab(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overdet-lab"))
        .args(args)
        .env("OVERDET_LAB_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const MEAN_VALUE: &str = "kind = mean_value\n[domain]\ntype = sector\nangle = pi/2\nn_arc = 128\nn_side = 32\n[mesh]\nh = H\n[data]\nf = saddle\n";

#[test]
fn empty_config_exits_2_naming_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "empty.cfg", "");
    let out = lab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing required field `kind`"), "{err}");
}

#[test]
fn bad_value_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.cfg", &MEAN_VALUE.replace("h = H", "h = -1"));
    let out = lab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 8"));
}

#[test]
fn repeated_runs_are_byte_identical_and_compare_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "mv.cfg", &MEAN_VALUE.replace("H", "0.04"));
    for dir in ["a", "b"] {
        let out = lab(&["run", &cfg, "-o", tmp.path().join(dir).to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = std::fs::read(tmp.path().join("a/results.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(tmp.path().join("b/results.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&csv_a).lines().count(), 11);

    // every CSV column is declared in the schema, in order
    let schema: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("a/schema.json")).unwrap()).unwrap();
    let declared: Vec<&str> = schema["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let header = String::from_utf8_lossy(&csv_a).lines().next().unwrap().to_string();
    assert_eq!(header.split(',').collect::<Vec<_>>(), declared);
    for plot in ["domain.svg", "psi.svg"] {
        assert!(tmp.path().join("a/plots").join(plot).exists());
    }

    let out = lab(&["compare", tmp.path().join("a").to_str().unwrap(), tmp.path().join("b").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let cmp: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cmp["flagged"], 0);
    assert!(cmp["metrics"].as_array().unwrap().iter().all(|m| m["max_abs_diff"] == 0.0));
}

#[test]
fn refinement_compare_shows_shrinking_deviations() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, h) in [("coarse", "0.02"), ("fine", "0.01")] {
        let cfg = write(tmp.path(), &format!("{name}.cfg"), &MEAN_VALUE.replace("H", h));
        let out = lab(&["run", &cfg, "-o", tmp.path().join(name).to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let out = lab(&["compare", tmp.path().join("coarse").to_str().unwrap(), tmp.path().join("fine").to_str().unwrap()], tmp.path());
    let cmp: Value = serde_json::from_slice(&out.stdout).unwrap();
    let max_dev = cmp["metrics"].as_array().unwrap().iter().find(|m| m["name"] == "max_dev").unwrap();
    assert!(max_dev["shrink_factor"].as_f64().unwrap() >= 3.0, "{max_dev}");
}

#[test]
fn different_sweeps_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "kind = stability_sweep\n[domain]\ntype = fourier\nn_boundary = 128\n[mesh]\nh = 0.08\n[sweep]\neps = EPS\n";
    for (name, eps) in [("one", "0.02, 0.05"), ("two", "0.02, 0.1")] {
        let cfg = write(tmp.path(), &format!("{name}.cfg"), &base.replace("EPS", eps));
        let out = lab(&["run", &cfg, "-o", tmp.path().join(name).to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let cfg = write(tmp.path(), "mv.cfg", &MEAN_VALUE.replace("H", "0.08"));
    lab(&["run", &cfg, "-o", tmp.path().join("mv").to_str().unwrap()], tmp.path());
    for other in ["two", "mv"] {
        let out = lab(&["compare", tmp.path().join("one").to_str().unwrap(), tmp.path().join(other).to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
    }
}

#[test]
fn failed_sweep_point_gives_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    // a cos(3θ) amplitude of 1.5 makes the radial function negative
    let cfg = write(
        tmp.path(),
        "sweep.cfg",
        "kind = stability_sweep\noutput = partial\n[domain]\ntype = fourier\nn_boundary = 128\n[mesh]\nh = 0.08\n[sweep]\neps = 0.05, 1.5\n",
    );
    let out = lab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let dir = tmp.path().join("partial");
    assert_eq!(std::fs::read_to_string(dir.join("results.csv")).unwrap().lines().count(), 2);
    let res: Value = serde_json::from_slice(&std::fs::read(dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(res["errors"][0]["point"], "eps=1.5");
}

#[test]
fn mesh_command_writes_a_readable_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("sector.mesh");
    let out = lab(&["mesh", "type=sector;angle=2pi/3;n_arc=48", "-o", file.to_str().unwrap(), "--h", "0.1"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = Mesh::from_text(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert!(mesh.apex().is_some());
    assert!((mesh.area() - std::f64::consts::PI / 3.0).abs() < 0.01);

    let out = lab(&["mesh", "type=blob", "-o", file.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
