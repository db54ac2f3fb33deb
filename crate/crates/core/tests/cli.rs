use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use featrestrict::io::{load_features, write_features, FeatureFormat};
use featrestrict::numeric::seeded_standard_normal;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featrestrict"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    assert!(!o.status.success());
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(v["error"]["kind"].is_string());
    v["error"].clone()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn losses_eval_reports_every_term() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    write_features(&path, &seeded_standard_normal(128, 8, 0).unwrap(), FeatureFormat::Csv).unwrap();
    let v = stdout_json(&cli(&["losses", "eval", "--input", s(&path), "--weights", "proposed"]));
    for key in ["kl", "bkl", "corr", "hist", "combined"] {
        assert!(v[key].as_f64().unwrap() >= 0.0, "{key}");
    }
    let expect = 10.0 * v["bkl"].as_f64().unwrap()
        + 100.0 * v["corr"].as_f64().unwrap()
        + 100.0 * v["hist"].as_f64().unwrap();
    assert!((v["combined"].as_f64().unwrap() - expect).abs() < 1e-9);
}

#[test]
fn losses_eval_single_column_has_no_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    fs::write(&path, "x\n0.5\n-0.5\n1.5\n").unwrap();
    let v = stdout_json(&cli(&["losses", "eval", "--input", s(&path), "--header", "--weights", "zeros"]));
    assert!(v["corr"].is_null());
    assert_eq!(v["combined"].as_f64().unwrap(), 0.0);
}

#[test]
fn losses_total_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    fs::write(
        &c,
        r#"{"adv":1,"cycle":1,"idt":1,"reg":1,"idt_reg":1,"class":1,"kl":1,"bkl":1,"corr_enc":1,"hist":1}"#,
    )
    .unwrap();
    let v = stdout_json(&cli(&["losses", "total", "--components", s(&c), "--weights", "proposed"]));
    assert_eq!(v["total"].as_f64().unwrap(), 222.5);

    let w = dir.path().join("w.json");
    fs::write(
        &w,
        r#"{"lambda_cycle":0,"lambda_idt":0,"lambda_reg":0,"lambda_idt_reg":0,"lambda_kl":2,"lambda_bkl":0,"lambda_corr_enc":0,"lambda_hist":0}"#,
    )
    .unwrap();
    let v = stdout_json(&cli(&["losses", "total", "--components", s(&c), "--weights", s(&w)]));
    // adv + class (default weight 1) + 2 * kl
    assert_eq!(v["total"].as_f64().unwrap(), 4.0);
}

#[test]
fn negative_weight_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    fs::write(&c, "{}").unwrap();
    let w = dir.path().join("w.json");
    fs::write(
        &w,
        r#"{"lambda_cycle":-1,"lambda_idt":0,"lambda_reg":0,"lambda_idt_reg":0,"lambda_kl":0,"lambda_bkl":0,"lambda_corr_enc":0,"lambda_hist":0}"#,
    )
    .unwrap();
    let e = stderr_error(&cli(&["losses", "total", "--components", s(&c), "--weights", s(&w)]));
    assert!(e["message"].as_str().unwrap().contains("lambda_cycle"));
}

#[test]
fn prdc_writes_scores_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.fbv");
    let fake = dir.path().join("fake.fbv");
    write_features(&real, &seeded_standard_normal(100, 4, 1).unwrap(), FeatureFormat::Fbv).unwrap();
    write_features(&fake, &seeded_standard_normal(80, 4, 2).unwrap(), FeatureFormat::Fbv).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        stdout_json(&cli(&["prdc", "--real", s(&real), "--fake", s(&fake), "--k", "3", "--out", s(out)]));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    for key in ["precision", "recall", "density", "coverage"] {
        assert!(v[key].is_f64(), "{key}");
    }
    assert_eq!(v["k"], 3);
    assert_eq!(v["n_real"], 100);
    assert_eq!(v["n_fake"], 80);
}

#[test]
fn prdc_rejects_seed_and_mismatched_widths() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.fbv");
    let fake = dir.path().join("fake.fbv");
    write_features(&real, &seeded_standard_normal(20, 4, 1).unwrap(), FeatureFormat::Fbv).unwrap();
    write_features(&fake, &seeded_standard_normal(20, 3, 2).unwrap(), FeatureFormat::Fbv).unwrap();
    let out = dir.path().join("o.json");
    let e = stderr_error(&cli(&[
        "prdc", "--real", s(&real), "--fake", s(&real), "--seed", "1", "--out", s(&out),
    ]));
    assert_eq!(e["kind"], "usage");
    stderr_error(&cli(&["prdc", "--real", s(&real), "--fake", s(&fake), "--out", s(&out)]));
    assert!(!out.exists());
}

#[test]
fn bad_feature_files_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let e = stderr_error(&cli(&["losses", "eval", "--input", s(&empty)]));
    assert_eq!(e["kind"], "parse");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1.0,2.0\n3.0,abc\n").unwrap();
    let e = stderr_error(&cli(&["losses", "eval", "--input", s(&bad)]));
    let msg = e["message"].as_str().unwrap();
    assert!(msg.contains("line 2, column 2"), "{msg}");

    let missing = dir.path().join("nope.csv");
    let e = stderr_error(&cli(&["losses", "eval", "--input", s(&missing)]));
    assert_eq!(e["kind"], "io");
}

#[test]
fn fbv_and_csv_files_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    let b = seeded_standard_normal(33, 5, 9).unwrap();
    let fbv = dir.path().join("x.fbv");
    let csv = dir.path().join("x.csv");
    write_features(&fbv, &b, FeatureFormat::Fbv).unwrap();
    write_features(&csv, &b, FeatureFormat::Csv).unwrap();
    assert_eq!(load_features(&fbv, FeatureFormat::Fbv, false).unwrap(), b);
    assert_eq!(load_features(&csv, FeatureFormat::Csv, false).unwrap(), b);
    let a = stdout_json(&cli(&["losses", "eval", "--input", s(&fbv)]));
    let c = stdout_json(&cli(&["losses", "eval", "--input", s(&csv)]));
    assert_eq!(a, c);
}

fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn train_toy_bundle_is_deterministic_and_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let v = stdout_json(&cli(&[
            "train-toy", "--condition", "conventional_kl", "--seed", "4", "--steps", "300", "--out", s(out),
        ]));
        assert_eq!(v["seed"], 4);
    }
    let files = bundle(&a);
    assert_eq!(files, bundle(&b));
    let hist = files.iter().filter(|(n, _)| n.starts_with("hist_dim")).count();
    assert_eq!(hist, 8);
    for name in ["report.json", "stats.csv", "corr.csv", "loss_trace.csv", "histograms.svg", "corr.svg", "manifest.json"] {
        assert!(files.iter().any(|(n, _)| n == name), "{name}");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config"]["restriction"]["steps"], 300);

    let c = dir.path().join("c");
    stdout_json(&cli(&["report", "--input", s(&a.join("report.json")), "--out", s(&c)]));
    for name in ["report.json", "stats.csv", "corr.csv", "hist_dim7.csv", "histograms.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(c.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn train_toy_rejects_unknown_condition() {
    let dir = tempfile::tempdir().unwrap();
    let e = stderr_error(&cli(&["train-toy", "--condition", "adam", "--out", s(dir.path())]));
    assert_eq!(e["kind"], "invalid");
}

#[test]
fn gradcheck_passes_defaults() {
    let v = stdout_json(&cli(&["gradcheck", "--batches", "5"]));
    for key in ["conventional_kl", "batch_kl", "histogram_imitation_loss"] {
        assert!(v[key].as_f64().unwrap() < 1e-4, "{key}");
    }
    assert!(v["correlation_loss"].as_f64().unwrap() < 1e-3);
}

#[test]
fn help_exits_zero() {
    assert!(cli(&["--help"]).status.success());
}
