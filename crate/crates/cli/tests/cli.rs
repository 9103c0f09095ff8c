use std::path::Path;
use std::process::{Command, Output};

fn rotdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotdet")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["synth", "--out", dir.to_str().unwrap(), "--seed", "3"];
    args.extend_from_slice(extra);
    rotdet(&args)
}

#[test]
fn iou_of_shifted_boxes() {
    let o = rotdet(&["iou", "--a", "0,0,2,4,0", "--b", "1,0,2,4,0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.3333");

    let o = rotdet(&["iou", "--a", "0,0,2,4,0", "--b", "0,0,4,2,-90"]);
    assert_eq!(stdout(&o).trim(), "1.0000");

    let o = rotdet(&["--format", "json", "iou", "--a", "0,0,2,4,0", "--b", "0,0,2,4,1.5707963267948966", "--radians"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["iou"].as_f64().unwrap() < 1.0);
}

#[test]
fn eval_of_ground_truth_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth(dir.path(), &[]).status.success());
    let gt = dir.path().join("annotations.json");
    let o = rotdet(&["eval", "--gt", gt.to_str().unwrap(), "--pred", gt.to_str().unwrap()]);
    // annotation files have no confidences
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let noisy = tempfile::tempdir().unwrap();
    assert!(synth(noisy.path(), &["--noisy"]).status.success());
    let pred = noisy.path().join("predictions.json");
    let gt = noisy.path().join("annotations.json");
    let report = dir.path().join("report.json");
    let csv = dir.path().join("pr.csv");
    let o = rotdet(&[
        "--format",
        "json",
        "eval",
        "--gt",
        gt.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--pr-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ap = v["ap50"].as_f64().unwrap();
    assert!(ap > 0.0 && ap < 1.0, "{ap}");
    assert!(report.exists());
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("recall,precision,confidence"));
}

#[test]
fn eval_of_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    let pred = dir.path().join("pred.json");
    std::fs::write(
        &gt,
        r#"{"format": "rotdet-annotations", "version": 1, "videos": [{"name": "v", "width": 100, "height": 100,
            "frames": [{"name": "0", "objects": [
                {"id": 1, "cx": 20, "cy": 30, "w": 10, "h": 25, "angle": 10},
                {"id": 2, "cx": 70, "cy": 60, "w": 12, "h": 30, "angle": -45}]}]}]}"#,
    )
    .unwrap();
    std::fs::write(
        &pred,
        r#"{"format": "rotdet-predictions", "version": 1, "videos": [{"name": "v",
            "frames": [{"name": "0", "detections": [
                {"cx": 20, "cy": 30, "w": 25, "h": 10, "angle": -80, "conf": 0.9},
                {"cx": 70, "cy": 60, "w": 12, "h": 30, "angle": 135, "conf": 0.8}]}]}]}"#,
    )
    .unwrap();
    let o = rotdet(&["eval", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let all = text.lines().find(|l| l.starts_with("all")).unwrap();
    assert_eq!(all.split_whitespace().collect::<Vec<_>>(), ["all", "1.0000", "1.0000", "1.0000", "1.0000"]);
}

#[test]
fn synth_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(synth(a.path(), &["--noisy"]).status.success());
    assert!(synth(b.path(), &["--noisy"]).status.success());
    for name in ["annotations.json", "predictions.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn nms_writes_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synth(dir.path(), &["--noisy"]).status.success());
    let pred = dir.path().join("predictions.json");
    let out = dir.path().join("kept.json");
    let o = rotdet(&["--format", "json", "nms", "--pred", pred.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["kept"].as_u64().unwrap() <= v["input"].as_u64().unwrap());
    assert!(out.exists());
}

#[test]
fn fit_demo_reports_convergence() {
    let o = rotdet(&["--format", "json", "fit-demo", "--loss", "periodic-l1", "--range", "wide"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["final_angular_error"].as_f64().unwrap() < 0.01);

    let o = rotdet(&["--format", "json", "fit-demo", "--loss", "plain-l1", "--range", "narrow"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["final_angular_error"].as_f64().unwrap() > 0.1);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = rotdet(&["fit-demo", "--steps", "20", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 22);
}

#[test]
fn ablation_and_hist_run() {
    let o = rotdet(&["--format", "json", "ablation", "--steps", "20"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);

    let o = rotdet(&["hist", "--bins", "4"]);
    assert!(o.status.success());
    assert!(!stdout(&o).is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(rotdet(&["iou", "--a", "0,0,2,4,0"]).status.code(), Some(2));
    assert_eq!(rotdet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rotdet(&["eval", "--gt", "/nonexistent/a.json", "--pred", "/nonexistent/b.json"]).status.code(), Some(3));
    assert_eq!(rotdet(&["iou", "--a", "0,0,-2,4,0", "--b", "0,0,2,4,0"]).status.code(), Some(5));
    assert_eq!(rotdet(&["iou", "--a", "0,0,2", "--b", "0,0,2,4,0"]).status.code(), Some(5));
    assert_eq!(rotdet(&["fit-demo", "--lr", "0"]).status.code(), Some(5));
    assert_eq!(rotdet(&["ablation", "--max-delta", "9"]).status.code(), Some(5));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": \"rotdet-annotations\", \"version\": 7, \"videos\": []}").unwrap();
    let o = rotdet(&["eval", "--gt", bad.to_str().unwrap(), "--pred", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
