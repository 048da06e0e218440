use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dqkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqkit"))
        .args(args)
        .env_remove("DQKIT_THREADS")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = dqkit(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn audit_of_balanced_synth() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bal.jsonl");
    let out = dqkit(&["synth", "balanced", "--classes", "100", "--per-class", "1250", "--seed", "3", "-o", p(&m)]);
    assert_eq!(out.status.code(), Some(0));

    let out = dqkit(&["audit", p(&m)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(r#""left_skew": 5.0000"#), "{text}");
    assert!(text.contains(r#""100": 0.0000"#));
    assert!(text.contains(r#""500": 0.0000"#));
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["indicators"]["total_samples"], 125_000);
    assert_eq!(doc["indicators"]["label_set_size"], 100);
    assert!(doc.get("stats").is_none());

    let out = dqkit(&["audit", p(&m), "--report-format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("125,000"), "{text}");
    assert!(text.contains("5.0"));
}

#[test]
fn audit_options_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "id,label\na,x\nb,x\nc,x\nd,y\n").unwrap();
    let labels = dir.path().join("labels.txt");
    fs::write(&labels, "x\ny\nz\n").unwrap();

    let doc = ok_json(&["audit", p(&m), "--labels", p(&labels), "--tail", "2", "--skew-k", "50"]);
    let ind = &doc["indicators"];
    assert_eq!(ind["label_set_size"], 3);
    // two head classes of three: x and y hold all four samples
    assert_eq!(ind["left_skew"], 100.0);
    // y (1) and z (0) are below 2
    assert!((ind["long_tail"]["2"].as_f64().unwrap() - 66.6667).abs() < 1e-9);

    let cfg = dir.path().join("dq.toml");
    fs::write(&cfg, "skew_k_percent = 50\ntail_thresholds = [2]\n").unwrap();
    let via_cfg = ok_json(&["audit", p(&m), "--labels", p(&labels), "--config", p(&cfg)]);
    assert_eq!(via_cfg["indicators"], doc["indicators"]);

    let stats = ok_json(&["audit", p(&m), "--stats"]);
    assert!(stats["stats"]["wall_clock_seconds"].as_f64().is_some());
}

#[test]
fn missing_input_is_a_data_error() {
    let out = dqkit(&["audit", "/nonexistent/m.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/m.jsonl"));
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.jsonl");
    fs::write(&m, "{\"id\":\"a\",\"labels\":[\"x\"]}\nnot json\n").unwrap();
    let out = dqkit(&["audit", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(dqkit(&[]).status.code(), Some(1));
    assert_eq!(dqkit(&["audit"]).status.code(), Some(1));
    assert_eq!(dqkit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dqkit(&["eval"]).status.code(), Some(1));
    assert_eq!(dqkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn transform_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("z.jsonl");
    let out = dqkit(&["synth", "zipf", "--classes", "20", "--size", "3000", "--seed", "1", "-o", p(&m)]);
    assert_eq!(out.status.code(), Some(0));

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for o in [&a, &b] {
        let out = dqkit(&["transform", p(&m), "-o", p(o), "--kind", "v-scale", "--per-class-target", "50", "--seed", "9"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let summary: Value = serde_json::from_slice(&fs::read(dir.path().join("a.jsonl.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "v_scale");
    assert_eq!(summary["seed"], 9);

    let plan = dir.path().join("plan.json");
    fs::write(&plan, r#"{"kind": "v_scale", "params": {"per_class_target": 50}, "seed": 9}"#).unwrap();
    let c = dir.path().join("c.jsonl");
    let out = dqkit(&["transform", p(&m), "-o", p(&c), "--plan", p(&plan)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let doc = ok_json(&["audit", p(&a)]);
    assert!(doc["indicators"]["per_class_max"].as_u64().unwrap() <= 50);

    let bad = dqkit(&["transform", p(&m), "-o", p(&c), "--kind", "v-scale", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn synth_histogram_output() {
    let doc = ok_json(&["synth", "zipf", "--classes", "4", "--size", "25", "--seed", "0", "--histogram"]);
    let counts: Vec<u64> = doc["counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(counts, vec![12, 6, 4, 3]);
    assert_eq!(doc["total"], 25);
}

#[test]
fn predict_ranks_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (name, args) in [
        ("flat", vec!["balanced", "--classes", "10", "--per-class", "600"]),
        ("steep", vec!["zipf", "--classes", "10", "--size", "6000", "--exponent", "2"]),
    ] {
        let m = dir.path().join(format!("{name}.jsonl"));
        let mut full = vec!["synth"];
        full.extend(args);
        full.extend(["--seed", "1", "-o", p(&m)]);
        assert_eq!(dqkit(&full).status.code(), Some(0));
        let r = dir.path().join(format!("{name}.json"));
        assert_eq!(dqkit(&["audit", p(&m), "-o", p(&r)]).status.code(), Some(0));
        reports.push(r);
    }
    let doc = ok_json(&["predict", "--reports", p(&reports[1]), p(&reports[0])]);
    let groups = doc["groups"].as_array().unwrap();
    assert_eq!(groups[0]["members"][0], "flat");
    assert_eq!(groups[1]["members"][0], "steep");
}

#[test]
fn validate_bundled_table() {
    let doc = ok_json(&["validate"]);
    let by_name = |n: &str| {
        doc["indicators"]
            .as_array()
            .unwrap()
            .iter()
            .find(|i| i["indicator"] == n)
            .unwrap()["concordance"]["discordant_pairs"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(by_name("long_tail@500"), 0);
    assert_eq!(by_name("long_tail@100"), 0);
    assert_eq!(by_name("left_skew"), 11);
    assert!(by_name("dataset_size") > 0);
}

#[test]
fn eval_commands() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "a,b,c\n0.9,0.1,0.0\n-1,-3,-2\n0.2,0.5,0.4\n").unwrap();
    let truth = dir.path().join("t.txt");
    fs::write(&truth, "b\nc\nc\n").unwrap();
    let allow = dir.path().join("allow.txt");
    fs::write(&allow, "b\nc\n").unwrap();

    let all = ok_json(&["eval", "--scores", p(&scores), "--truth", p(&truth)]);
    assert!((all["top1_accuracy"].as_f64().unwrap() - 0.0).abs() < 1e-12);
    let masked = ok_json(&["eval", "--scores", p(&scores), "--truth", p(&truth), "--allow", p(&allow)]);
    assert!((masked["top1_accuracy"].as_f64().unwrap() - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(masked["allowed_classes"], 2);

    let acc = dir.path().join("acc.json");
    fs::write(&acc, r#"{"v2": 40.0, "sketch": 40.0, "r": 40.0, "a": 40.0}"#).unwrap();
    let rob = ok_json(&["eval", "robustness", "--accuracies", p(&acc)]);
    assert_eq!(rob["average_robustness"], 40.0);
    assert_eq!(rob["shifts"], 4);
}
