//! End-to-end tests driving the compiled `proseg` binary.

use std::path::Path;
use std::process::{Command, Output};

fn proseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proseg"))
        .args(args)
        .output()
        .expect("spawning proseg")
}

fn ok(args: &[&str]) -> Output {
    let out = proseg(args);
    assert!(
        out.status.success(),
        "proseg {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn phantom_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "phantom",
            "--lesions",
            "2",
            "--seed",
            "9",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["t2.mha", "prostate.mha", "lesion_00.mha", "detections.jsonl"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical seeds");
    }
}

#[test]
fn phantom_without_lesions_emits_only_prostate_detections() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "0",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(dir.path().join("detections.jsonl")).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["label"], "prostate");
    }
}

#[test]
fn assemble_ranks_phantom_lesions_by_peak_score() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "4",
        "--seed",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    ok(&[
        "assemble",
        dir.path().join("detections.jsonl").to_str().unwrap(),
        "--prostate-mask",
        dir.path().join("prostate.mha").to_str().unwrap(),
        "--labeled-volume",
        "labels.mha",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let out = read_json(&dir.path().join("lesions.json"));
    let lesions = out["lesions"].as_array().unwrap();
    assert_eq!(lesions.len(), 4);
    let scores: Vec<f64> = lesions.iter().map(|l| l["score"].as_f64().unwrap()).collect();
    for w in scores.windows(2) {
        assert!(w[0] >= w[1]);
    }
    assert_eq!(lesions[0]["rank"], 1);
    assert!(dir.path().join("labels.mha").exists());
}

#[test]
fn assemble_empty_detections_yields_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let dets = dir.path().join("none.jsonl");
    std::fs::write(&dets, "").unwrap();
    ok(&[
        "assemble",
        dets.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let out = read_json(&dir.path().join("lesions.json"));
    assert_eq!(out["lesions"].as_array().unwrap().len(), 0);
}

#[test]
fn assemble_single_detection_is_rank_one_single_slice() {
    let dir = tempfile::tempdir().unwrap();
    let dets = dir.path().join("one.jsonl");
    std::fs::write(
        &dets,
        "{\"slice\": 3, \"score\": 0.9, \"label\": \"lesion\", \"bbox\": [0,0,2,1], \"mask\": {\"width\": 4, \"height\": 4, \"runs\": [2,14]}}\n",
    )
    .unwrap();
    ok(&[
        "assemble",
        dets.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let out = read_json(&dir.path().join("lesions.json"));
    let lesions = out["lesions"].as_array().unwrap();
    assert_eq!(lesions.len(), 1);
    assert_eq!(lesions[0]["rank"], 1);
    assert_eq!(lesions[0]["slice_range"], serde_json::json!([3, 3]));
}

#[test]
fn assemble_reports_malformed_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let dets = dir.path().join("bad.jsonl");
    std::fs::write(&dets, "not json\n").unwrap();
    let out = proseg(&[
        "assemble",
        dets.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn metrics_identical_predictions_summarize_to_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "2",
        "--seed",
        "11",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let manifest = dir.path().join("cohort.json");
    let case = |id: &str| {
        serde_json::json!({
            "case_id": id,
            "prostate": "prostate.mha",
            "lesions": ["lesion_00.mha", "lesion_01.mha"],
            "lesions_pred": ["lesion_00.mha", "lesion_01.mha"],
        })
    };
    std::fs::write(
        &manifest,
        serde_json::to_string(&serde_json::json!([case("c1"), case("c2")])).unwrap(),
    )
    .unwrap();
    ok(&[
        "metrics",
        manifest.to_str().unwrap(),
        "--mode",
        "lesion-pixel",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["cases"], 2);
    assert_eq!(summary["dsc"]["mean"], 1.0);
    assert_eq!(summary["dsc"]["sd"], 0.0);
    assert_eq!(summary["agreement"]["mean"], 1.0);
    assert_eq!(summary["sd_convention"], "population");

    // summary is a pure re-aggregation of the per-case reports
    for id in ["c1", "c2"] {
        let report = read_json(&dir.path().join(format!("{id}.metrics.json")));
        assert_eq!(report["dsc"], 1.0);
        assert_eq!(report["mode"], "lesion-pixel");
    }
}

#[test]
fn metrics_isolates_a_failing_case() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "1",
        "--seed",
        "5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let manifest = dir.path().join("cohort.json");
    std::fs::write(
        &manifest,
        serde_json::to_string(&serde_json::json!([
            {
                "case_id": "good",
                "prostate": "prostate.mha",
                "lesions": ["lesion_00.mha"],
                "lesions_pred": ["lesion_00.mha"],
            },
            {
                "case_id": "bad",
                "prostate": "missing.mha",
                "lesions": ["lesion_00.mha"],
                "lesions_pred": ["lesion_00.mha"],
            },
        ]))
        .unwrap(),
    )
    .unwrap();
    let out = proseg(&[
        "metrics",
        manifest.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "a failing case must set a nonzero exit");
    // the good case was still evaluated and written
    assert!(dir.path().join("good.metrics.json").exists());
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["cases"], 1);
    assert_eq!(summary["failures"][0]["case_id"], "bad");
}

#[test]
fn prostate_select_keeps_one_detection_per_slice() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "1",
        "--seed",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    ok(&[
        "prostate-select",
        dir.path().join("detections.jsonl").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let out = read_json(&dir.path().join("prostate_slices.json"));
    let decisions = out.as_array().unwrap();
    assert!(!decisions.is_empty());
    for d in decisions {
        if d["present"].as_bool().unwrap() {
            assert!(d["score"].as_f64().unwrap() > 0.0);
        } else {
            assert!(d.get("score").is_none());
        }
    }
}

#[test]
fn preprocess_resizes_to_target() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    ok(&[
        "preprocess",
        "--input",
        dir.path().join("t2.mha").to_str().unwrap(),
        "--target-long",
        "128",
        "--hist-eq",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let pre = proseg_core::load_volume(dir.path().join("t2_pre.mha")).unwrap();
    assert_eq!((pre.dims.0, pre.dims.1), (128, 128));
    let sidecar = read_json(&dir.path().join("t2_pre.json"));
    assert_eq!(sidecar["scale"], 2.0); // phantom slices are 64x64
    assert_eq!(sidecar["target_long"], 128);
}

#[test]
fn augment_writes_replayable_records() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "augment",
            dir.path().join("t2.mha").to_str().unwrap(),
            "--mask",
            dir.path().join("prostate.mha").to_str().unwrap(),
            "--mode",
            "prostate",
            "--count",
            "2",
            "--seed",
            "21",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["aug_0000.mha", "aug_0000_mask.mha", "aug_0001.mha", "aug_0001.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical seeds");
    }
}

#[test]
fn overlay_renders_a_png_per_slice() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phantom",
        "--lesions",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    ok(&[
        "assemble",
        dir.path().join("detections.jsonl").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    ok(&[
        "overlay",
        dir.path().join("t2.mha").to_str().unwrap(),
        "--prostate",
        dir.path().join("prostate.mha").to_str().unwrap(),
        "--lesions",
        dir.path().join("lesions.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let v = proseg_core::load_volume(dir.path().join("t2.mha")).unwrap();
    for z in 0..v.dims.2 {
        let png = dir.path().join(format!("slice_{z:03}.png"));
        let img = image::open(&png).unwrap().into_rgb8();
        assert_eq!((img.width() as usize, img.height() as usize), (v.dims.0, v.dims.1));
    }
}
