use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgc::io::write_dataset;
use cgc::synth::{synth_sbm, SbmParams};

fn cgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgc"))
        .args(args)
        .env_remove("CGC_DATA_DIR")
        .output()
        .expect("run cgc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout: {}\nstderr: {}", o.status.code(), stdout(&o), String::from_utf8_lossy(&o.stderr));
    o
}

fn sbm_dataset(dir: &Path) -> PathBuf {
    let ds = synth_sbm(
        SbmParams {
            classes: 3,
            nodes_per_class: 60,
            p_in: 0.1,
            p_out: 0.01,
            d: 12,
            class_center_scale: 1.0,
        },
        2,
    )
    .unwrap();
    let path = dir.join("sbm");
    write_dataset(&ds, &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convert_builds_a_dataset_from_text() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let files = [
        ("edges.txt", "0 1\n1 2\n2 3\n3 0\n# comment\n1 1\n"),
        ("features.csv", "1,0\n0,1\n1,1\n0,0\n"),
        ("labels.txt", "0\n1\n0\n1\n"),
        ("train.txt", "0 1\n"),
        ("val.txt", "2\n"),
        ("test.txt", "3\n"),
    ];
    for (name, body) in files {
        fs::write(t.join(name), body).unwrap();
    }
    let out = t.join("ds");
    let o = ok(cgc(&[
        "convert", "--edges", s(&t.join("edges.txt")), "--features", s(&t.join("features.csv")),
        "--labels", s(&t.join("labels.txt")), "--train", s(&t.join("train.txt")), "--val", s(&t.join("val.txt")),
        "--test", s(&t.join("test.txt")), "--out", s(&out), "--json",
    ]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_nodes"], 4);
    assert_eq!(v["num_edges"], 4);
    assert_eq!(v["num_classes"], 2);
    let ds = cgc::io::read_dataset(&out).unwrap();
    assert_eq!(ds.train, [0, 1]);
}

#[test]
fn condense_is_deterministic_and_evaluates() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = sbm_dataset(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(cgc(&["condense", "--dataset", s(&ds), "--out", s(out), "--preset", "cgc", "--nodes", "9", "--seed", "4"]));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "row_offsets.u64"), "{names:?}");
    for n in names.iter().filter(|n| *n != "provenance.json") {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }

    let csv = tmp.path().join("runs.csv");
    for _ in 0..2 {
        ok(cgc(&[
            "evaluate", "--dataset", s(&ds), "--artifact", s(&a), "--model", "sgc_ridge", "--repeats", "2",
            "--csv", s(&csv),
        ]));
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("sbm,cgc,0.05,sgc_ridge,"));

    let md = tmp.path().join("summary.md");
    let o = ok(cgc(&["report", "--input", s(&csv), "--out-md", s(&md)]));
    assert!(stdout(&o).contains("| sbm | cgc | 0.0500 | sgc_ridge | 2 |"));
    assert_eq!(fs::read_to_string(&md).unwrap(), stdout(&o));
}

#[test]
fn config_file_is_layered_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = sbm_dataset(tmp.path());
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"dataset": "{}", "pipeline": {{"preset": "simdm", "nodes": 6}}}}"#, s(&ds))).unwrap();
    let out = tmp.path().join("art");
    let o = ok(cgc(&["condense", "--config", s(&cfg), "--out", s(&out), "--tau", "2", "--json"]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_nodes"], 6);
    assert_eq!(v["provenance"]["preset"], "simdm");
    assert_eq!(v["provenance"]["config"]["tau"], 2.0);
    assert_eq!(v["provenance"]["config"]["p"], 0.0);
}

#[test]
fn whole_dataset_evaluation_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = sbm_dataset(tmp.path());
    let o = ok(cgc(&["evaluate", "--dataset", s(&ds), "--whole", "--model", "sgc_ridge", "--repeats", "1", "--json"]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["row"]["preset"], "whole");
    assert!(v["report"]["mean"].as_f64().unwrap() > 0.5);
}

#[test]
fn bench_times_one_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = sbm_dataset(tmp.path());
    let o = ok(cgc(&["bench", "--dataset", s(&ds), "--runs", "1", "--preset", "cgc_x", "--json"]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["preset"], "cgc_x");
}

#[test]
fn verify_props_passes() {
    let o = ok(cgc(&["verify-props", "--draws", "5", "--seed", "3"]));
    let out = stdout(&o);
    assert_eq!(out.matches("| pass |").count(), 8, "{out}");
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let bad_preset = cgc(&["condense", "--dataset", "nowhere", "--out", s(&out), "--preset", "fastest"]);
    assert_eq!(bad_preset.status.code(), Some(2));
    let missing = cgc(&["condense", "--dataset", s(&tmp.path().join("nowhere")), "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("dataset not found"));

    let ds = sbm_dataset(tmp.path());
    let too_big = cgc(&["condense", "--dataset", s(&ds), "--out", s(&out), "--nodes", "500"]);
    assert_eq!(too_big.status.code(), Some(2));
    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"pipeline": {"temperature": 1}}"#).unwrap();
    let unknown_key = cgc(&["condense", "--config", s(&bad_cfg), "--dataset", s(&ds), "--out", s(&out)]);
    assert_eq!(unknown_key.status.code(), Some(2));
}
