use std::path::Path;
use std::process::{Command, Output};

fn coldbend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldbend")).args(args).env("RUST_LOG", "warn").env_remove("COLDBEND_MODEL").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn flat_demo_is_stress_free() {
    let o = coldbend(&["simulate", "--flat-demo"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("sigma = 0.000000 MPa"), "{}", stdout(&o));
}

#[test]
fn unknown_flags_and_keys_are_validation_errors() {
    assert_eq!(code(&coldbend(&["simulate", "--flat-demo", "--frobnicate"])), 2);
    assert_eq!(code(&coldbend(&["simulate", "--flat-demo", "--set", "panel.colour=red"])), 2);
    assert_eq!(code(&coldbend(&["simulate", "--flat-demo", "--set", "panel.material.thickness=-1"])), 2);
    assert_eq!(code(&coldbend(&["simulate", "--flat-demo", "--set", "seed"])), 2);
    assert_eq!(code(&coldbend(&["nonsense"])), 2);
    assert_eq!(code(&coldbend(&["--help"])), 0);
}

#[test]
fn missing_inputs_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let o = coldbend(&["dataset", "stats", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let o = coldbend(&["simulate", "--boundary", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn a_model_is_required_to_serve() {
    assert_eq!(code(&coldbend(&["serve", "--port", "0"])), 2);
}

#[test]
fn config_file_overrides_defaults_and_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"panel": {"mesh": {"boundary_edges": 16}}}"#).unwrap();
    let o = coldbend(&["--config", good.to_str().unwrap(), "simulate", "--saddle", "400,380,20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["first"]["sigma"].as_f64().unwrap() > 0.0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"panel": {"meshing": {}}}"#).unwrap();
    assert_eq!(code(&coldbend(&["--config", bad.to_str().unwrap(), "simulate", "--flat-demo"])), 2);
}

#[test]
fn verify_passes_on_a_quick_run() {
    let o = coldbend(&["verify", "--cases", "4"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS ")).count(), 4, "{out}");
}

fn generate(dir: &Path, name: &str, seed: &str) -> (Vec<u8>, Output) {
    let out = dir.join(name);
    let o = coldbend(&[
        "--seed",
        seed,
        "--jobs",
        "1",
        "--set",
        "panel.mesh.boundary_edges=16",
        "dataset",
        "generate",
        "--count",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    (std::fs::read(&out).unwrap_or_default(), o)
}

#[test]
fn same_arguments_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, oa) = generate(dir.path(), "a.jsonl", "5");
    let (b, ob) = generate(dir.path(), "b.jsonl", "5");
    let (c, _) = generate(dir.path(), "c.jsonl", "6");
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(oa.stdout, ob.stdout);
    assert_ne!(a, c);
}

#[test]
fn dataset_train_and_eval_chain() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let model = dir.path().join("m.mdn");
    let o = coldbend(&[
        "--set",
        "panel.mesh.boundary_edges=16",
        "--set",
        "dataset.validation_fraction=0.3",
        "dataset",
        "generate",
        "--count",
        "6",
        "--out",
        ds.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(stats.is_object());
    let o = coldbend(&[
        "--set",
        "train.hidden=16",
        "--set",
        "train.blocks=1",
        "--set",
        "train.batch=16",
        "train",
        "--dataset",
        ds.to_str().unwrap(),
        "--epochs",
        "3",
        "--out",
        model.to_str().unwrap(),
        "--history",
        dir.path().join("h.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = coldbend(&["eval", "--model", model.to_str().unwrap(), "--dataset", ds.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for k in ["stress_mae", "false_negative_rate", "false_positive_rate"] {
        assert!(r[k].as_f64().unwrap().is_finite(), "{k}");
    }
    let o = coldbend(&["eval", "--model", model.to_str().unwrap(), "--dataset", ds.to_str().unwrap()]);
    assert!(stdout(&o).contains("false negatives at 65 MPa"));
}
