use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eyescreen"))
}

fn run(dir: &Path, out: &str, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .args(["--out-dir", out])
        .output()
        .expect("spawn eyescreen")
}

fn ok(dir: &Path, out: &str, args: &[&str]) {
    let o = run(dir, out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn assert_valid(name: &str, values: &[Value]) {
    let v = schema(name);
    assert!(!values.is_empty());
    for value in values {
        if let Err(e) = v.validate(value) {
            panic!("{name}: {e} in {value}");
        }
    }
}

fn write(dir: &Path, name: &str, value: &Value) {
    std::fs::write(dir.join(name), value.to_string()).unwrap();
}

#[test]
fn synth_and_locate_reports_validate() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, "eye", &["synth", "--count", "6", "--seed", "11"]);
    ok(d, "loc", &["locate", "--manifest", "eye/manifest.jsonl", "--overlay"]);
    assert_valid("corpus", &[read_json(&d.join("eye/corpus.json"))]);
    assert_valid("manifest_record", &read_jsonl(&d.join("eye/manifest.jsonl")));
    let records = read_jsonl(&d.join("loc/locate.jsonl"));
    assert_eq!(records.len(), 6);
    assert_valid("locate_record", &records);
    let summary = read_json(&d.join("loc/locate_summary.json"));
    assert_valid("locate_summary", std::slice::from_ref(&summary));
    assert!(summary["localization"]["mean_ede"].as_f64().unwrap() <= 2.8);
    let overlays = std::fs::read_dir(d.join("loc"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with("_overlay.png")
        })
        .count();
    assert_eq!(overlays, 6);
}

#[test]
fn config_file_is_echoed_and_flags_override_it() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, "eye", &["synth", "--count", "2"]);
    std::fs::write(
        d.join("run.toml"),
        "[locate.canny]\nhigh_quantile = 0.95\nlow_ratio = 0.3\n",
    )
    .unwrap();
    ok(
        d,
        "a",
        &["locate", "--manifest", "eye/manifest.jsonl", "--config", "run.toml"],
    );
    ok(
        d,
        "b",
        &[
            "locate",
            "--manifest",
            "eye/manifest.jsonl",
            "--config",
            "run.toml",
            "--canny-low-ratio",
            "0.45",
        ],
    );
    let a = read_json(&d.join("a/locate_summary.json"));
    let b = read_json(&d.join("b/locate_summary.json"));
    assert_eq!(a["config"]["locate"]["canny"]["high_quantile"], 0.95);
    assert_eq!(a["config"]["locate"]["canny"]["low_ratio"], 0.3);
    assert_eq!(b["config"]["locate"]["canny"]["low_ratio"], 0.45);
}

#[test]
fn out_dir_defaults_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let o = bin()
        .current_dir(t.path())
        .env("EYESCREEN_OUT_DIR", "from_env")
        .args(["synth", "--count", "1"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(t.path().join("from_env/manifest.jsonl").exists());
}

#[test]
fn missing_image_is_a_hard_failure_naming_the_path() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), "out", &["locate", "no_such_image.png"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_image.png"));
    let rec = &read_jsonl(&t.path().join("out/locate.jsonl"))[0];
    assert_eq!(rec["status"], "error");
}

#[test]
fn soft_failures_keep_exit_code_zero() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    std::fs::write(
        d.join("flat.pgm"),
        [b"P5\n32 32\n255\n".as_slice(), &[90u8; 1024]].concat(),
    )
    .unwrap();
    let o = run(d, "out", &["locate", "flat.pgm"]);
    assert_eq!(o.status.code(), Some(0));
    let rec = &read_jsonl(&d.join("out/locate.jsonl"))[0];
    assert_eq!(rec["status"], "failed");
    assert_valid("locate_record", std::slice::from_ref(rec));
}

#[test]
fn usage_errors_exit_with_two() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(run(d, "o", &["locate"]).status.code(), Some(2));
    assert_eq!(run(d, "o", &["ring-fit", "x.png"]).status.code(), Some(2));
    assert_eq!(run(d, "o", &["losses"]).status.code(), Some(2));
    assert_eq!(run(d, "o", &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn ring_fit_measures_and_calibrates() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, "ring", &["synth", "--kind", "ring", "--count", "3", "--seed", "4"]);
    ok(
        d,
        "published",
        &[
            "ring-fit",
            "--manifest",
            "ring/manifest.jsonl",
            "--published-model",
            "--overlay",
        ],
    );
    let records = read_jsonl(&d.join("published/ring.jsonl"));
    assert_valid("ring_record", &records);
    for r in &records {
        assert!(r["abs_error"].as_f64().unwrap() <= 0.25, "{r}");
    }
    let summary = read_json(&d.join("published/ring_summary.json"));
    assert_valid("ring_summary", &[summary]);
    assert!(d.join("published/0000_ring_0000_overlay.png").exists());

    let pairs: Vec<Value> = [-6.0f64, -5.25, -4.75, -3.0, -1.0, 0.0]
        .iter()
        .map(|&x| serde_json::json!([x, 0.1136 * x + 24.4738]))
        .collect();
    write(d, "pairs.json", &Value::Array(pairs));
    ok(
        d,
        "fit",
        &[
            "ring-fit",
            "--fit-file",
            "pairs.json",
            "--manifest",
            "ring/manifest.jsonl",
        ],
    );
    let model = read_json(&d.join("fit/model.json"));
    assert_valid("model", std::slice::from_ref(&model));
    assert!((model["slope"].as_f64().unwrap() - 0.1136).abs() <= 1e-9);
    assert!((model["intercept"].as_f64().unwrap() - 24.4738).abs() <= 1e-9);

    ok(
        d,
        "reuse",
        &[
            "ring-fit",
            "--model",
            "fit/model.json",
            "--manifest",
            "ring/manifest.jsonl",
        ],
    );
    let a = std::fs::read(d.join("fit/ring.jsonl")).unwrap();
    let b = std::fs::read(d.join("reuse/ring.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn calibration_needs_two_distinct_diopters() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), "o", &["ring-fit", "--fit=-3,24.1", "--fit=-3,24.2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("distinct"));
}

#[test]
fn losses_report_terms_and_schedule() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let labels: Vec<u8> = (0..64).map(|i| if (i % 8) < 4 { 2 } else { 0 }).collect();
    let mut values = Vec::new();
    for &l in &labels {
        for c in 0..4u8 {
            values.push(if c == l { 1.0 } else { 0.0 });
        }
    }
    write(
        d,
        "truth.json",
        &serde_json::json!({"width": 8, "height": 8, "num_classes": 4, "labels": labels}),
    );
    write(
        d,
        "pred.json",
        &serde_json::json!({"width": 8, "height": 8, "classes": 4, "values": values}),
    );
    ok(
        d,
        "l",
        &[
            "losses",
            "--pred",
            "pred.json",
            "--truth",
            "truth.json",
            "--epoch",
            "0",
            "--sdm-out",
            "sdm.bin",
        ],
    );
    let r = read_json(&d.join("l/losses.json"));
    assert_valid("losses", std::slice::from_ref(&r));
    assert!(r["losses"]["total"].as_f64().unwrap() <= 1e-5);
    assert_eq!(r["losses"]["lambda"], serde_json::json!([1.0, 10.0, 1.0, 0.0]));
    let grid = std::fs::read(d.join("sdm.bin")).unwrap();
    assert_eq!(&grid[..4], b"SDM1");
    assert_eq!(grid.len(), 12 + 64 * 4);

    write(
        d,
        "small.json",
        &serde_json::json!({"width": 2, "height": 2, "num_classes": 4, "labels": [0, 2, 2, 0]}),
    );
    let o = run(d, "m", &["losses", "--pred", "pred.json", "--truth", "small.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_passes_on_random_instances() {
    let t = tempfile::tempdir().unwrap();
    let o = run(
        t.path(),
        "g",
        &["losses", "--gradcheck", "--seed", "3", "--instances", "5"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&t.path().join("g/losses.json"));
    assert_valid("losses", std::slice::from_ref(&r));
    assert_eq!(r["gradcheck"]["passed"], true);
    assert!(r["gradcheck"]["max_relative_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn quality_of_a_constant_image() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    std::fs::write(d.join("c.pgm"), [b"P5\n8 8\n255\n".as_slice(), &[70u8; 64]].concat()).unwrap();
    ok(d, "q", &["quality", "c.pgm"]);
    let rec = &read_jsonl(&d.join("q/quality.jsonl"))[0];
    assert_valid("quality_record", std::slice::from_ref(rec));
    assert_eq!(rec["brightness"], 70.0);
    assert_eq!(rec["rms_contrast"], 0.0);
    assert_eq!(rec["snr_db"], "undefined");
    assert_valid("quality_summary", &[read_json(&d.join("q/quality_summary.json"))]);
    let csv = std::fs::read_to_string(d.join("q/quality.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "c.pgm,ok,70,0,undefined,0,0");
}

#[test]
fn segeval_scores() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    write(
        d,
        "p.json",
        &serde_json::json!({"width": 2, "height": 2, "num_classes": 2, "labels": [1, 1, 0, 0]}),
    );
    write(
        d,
        "t.json",
        &serde_json::json!({"width": 2, "height": 2, "num_classes": 2, "labels": [1, 0, 0, 0]}),
    );
    ok(d, "same", &["segeval", "--pred", "t.json", "--truth", "t.json"]);
    let r = read_json(&d.join("same/segeval.json"));
    assert_valid("segeval", std::slice::from_ref(&r));
    assert_eq!(r["f1"], 1.0);
    assert_eq!(r["miou"], 1.0);
    ok(d, "diff", &["segeval", "--pred", "p.json", "--truth", "t.json"]);
    let r = read_json(&d.join("diff/segeval.json"));
    assert!((r["miou"].as_f64().unwrap() - 7.0 / 12.0).abs() < 1e-12);
    assert!((r["per_class_f1"][1].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn regeneration_reproduces_the_corpus() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(
        d,
        "a",
        &[
            "synth",
            "--kind",
            "ring",
            "--count",
            "3",
            "--format",
            "pgm",
            "--noise-sigma",
            "8",
        ],
    );
    ok(d, "b", &["synth", "--regenerate", "a/manifest.jsonl"]);
    assert_valid("corpus", &[read_json(&d.join("b/corpus.json"))]);
    for name in [
        "manifest.jsonl",
        "manifest.sha256",
        "ring_0000.pgm",
        "ring_0001.pgm",
        "ring_0002.pgm",
    ] {
        assert_eq!(
            std::fs::read(d.join("a").join(name)).unwrap(),
            std::fs::read(d.join("b").join(name)).unwrap()
        );
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, "e1", &["synth", "--count", "5", "--jobs", "1"]);
    ok(d, "e4", &["synth", "--count", "5", "--jobs", "4"]);
    assert_eq!(
        std::fs::read(d.join("e1/manifest.jsonl")).unwrap(),
        std::fs::read(d.join("e4/manifest.jsonl")).unwrap()
    );
    ok(d, "l1", &["locate", "--manifest", "e1/manifest.jsonl", "--jobs", "1"]);
    ok(d, "l4", &["locate", "--manifest", "e1/manifest.jsonl", "--jobs", "4"]);
    assert_eq!(
        std::fs::read(d.join("l1/locate.jsonl")).unwrap(),
        std::fs::read(d.join("l4/locate.jsonl")).unwrap()
    );
}
