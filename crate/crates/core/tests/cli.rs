use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidar-iid"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

#[test]
fn synth_decompose_annotate_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let s = json_out(&cli(&["synth", "--size", "32", "--seed", "3", "--out", "scene"], d));
    assert_eq!(s["width"], 32);

    let dec = json_out(&cli(
        &[
            "decompose", "--image", "scene/image.png", "--lidar", "scene/lidar.png", "--mask",
            "scene/lidar_mask.png", "--out", "dec",
        ],
        d,
    ));
    assert!(dec["reconstruction_error"].as_f64().unwrap() < 1e-3);
    assert!(d.join("dec/albedo.png").exists() && d.join("dec/shade.png").exists());

    let ann = json_out(&cli(
        &["annotate", "--image", "scene/image.png", "--albedo", "scene/albedo.png", "--r-frac", "0.1", "--out", "pairs.jsonl"],
        d,
    ));
    assert_eq!(ann["labelled"], true);

    let ev = json_out(&cli(&["evaluate", "--pred", "dec/albedo.png", "--ann", "pairs.jsonl", "--delta", "0.1"], d));
    for k in ["whdr", "precision", "recall", "f_score"] {
        let v = ev[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{k} = {v}");
    }
}

#[test]
fn densify_reads_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    json_out(&cli(&["synth", "--size", "16", "--out", "scene"], d));
    std::fs::write(d.join("l.csv"), "u,v,intensity\n1,1,0.5\n10,12,0.25\n").unwrap();
    let out = json_out(&cli(&["densify", "--image", "scene/image.png", "--lidar", "l.csv", "--out", "dn"], d));
    assert_eq!(out["observed_pixels"], 2);
    assert!(d.join("dn/dense.png").exists());
}

#[test]
fn batch_run_with_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("run.cfg"),
        "synth_size = 24\nseeds = 0, 1\ndensities = 1.0\nmethods = baseline_r, retinex\n",
    )
    .unwrap();
    let out = json_out(&cli(&["run", "--config", "run.cfg", "--out", "res"], d));
    assert_eq!(out["runs"], 4);
    assert!(d.join("res/summary.json").exists() && d.join("res/table.txt").exists());
    let rep = json_out(&cli(&["report", "res/summary.json"], d));
    assert_eq!(rep["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(cli(&["bogus"], d).status.code(), Some(1));
    assert_eq!(cli(&["--help"], d).status.code(), Some(0));
    // missing input file is a usage problem
    assert_eq!(cli(&["densify", "--image", "nope.png", "--lidar", "nope.csv"], d).status.code(), Some(1));
    json_out(&cli(&["synth", "--size", "16", "--out", "scene"], d));
    std::fs::write(d.join("bad.csv"), "u,v,intensity\n99,0,0.5\n").unwrap();
    let out = cli(&["densify", "--image", "scene/image.png", "--lidar", "bad.csv"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
    std::fs::write(d.join("bad.cfg"), "params.solver.nope = 1\n").unwrap();
    assert_eq!(cli(&["synth", "--config", "bad.cfg"], d).status.code(), Some(1));
}
