use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use btmodel::block_model::{CategoryParams, ModelParams};
use btmodel::classifier::ClassificationReport;
use btmodel::features::{FeatureMatrix, Schema};
use btmodel::inference::FitReport;
use btmodel::io::{parse_blocks, parse_labels, read_json};

fn btmodel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btmodel"))
        .args(args)
        .current_dir(dir)
        .env_remove("BTMODEL_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) {
    let out = btmodel(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--blocks", "20", "--entities-per-category", "5", "--seed", "7", "--out", "a"], d);
    ok(&["simulate", "--blocks", "20", "--entities-per-category", "5", "--seed", "7", "--out", "b"], d);
    ok(&["simulate", "--blocks", "20", "--entities-per-category", "5", "--seed", "8", "--out", "c"], d);
    for f in ["blocks.jsonl", "labels.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap());
    }
    assert_ne!(fs::read(d.join("a/blocks.jsonl")).unwrap(), fs::read(d.join("c/blocks.jsonl")).unwrap());

    // The environment supplies the default seed.
    let out = Command::new(env!("CARGO_BIN_EXE_btmodel"))
        .args(["simulate", "--blocks", "20", "--entities-per-category", "5", "--out", "e"])
        .current_dir(d)
        .env("BTMODEL_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(d.join("a/blocks.jsonl")).unwrap(), fs::read(d.join("e/blocks.jsonl")).unwrap());

    // Artifacts re-parse.
    assert_eq!(parse_blocks(&d.join("a/blocks.jsonl")).unwrap().len(), 20);
    assert_eq!(parse_labels(&d.join("a/labels.csv")).unwrap().entities().len(), 20);
}

#[test]
fn fit_recovers_address_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--model", "address", "--blocks", "300", "--seed", "3", "--out", "run"], d);
    assert!(!d.join("run/labels.csv").exists());
    ok(&["fit", "--in", "run/blocks.jsonl", "--out", "fit/report.json", "--params-out", "fit/params.json"], d);
    let report: FitReport = read_json(&d.join("fit/report.json")).unwrap();
    let truth = ModelParams::default();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(report.all.lambda_in, truth.lambda_in) < 0.05);
    assert!(rel(report.all.lambda_out, truth.lambda_out) < 0.05);
    assert!(rel(report.lambda_size, truth.lambda_size) < 0.05);
    assert!((report.all.p_new - truth.p_new).abs() < 0.02);
    assert!((report.all.p_utxo_in - truth.p_utxo_in).abs() < 0.02);
    assert!(report.pearson_in_out.unwrap().abs() < 0.05);

    // Fitted parameters feed straight back into the simulator.
    let params: ModelParams = read_json(&d.join("fit/params.json")).unwrap();
    assert_eq!(params, report.model_params());
    ok(&["simulate", "--model", "address", "--params", "fit/params.json", "--blocks", "5", "--out", "again"], d);
}

#[test]
fn fit_with_labels_writes_category_params() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--blocks", "60", "--entities-per-category", "8", "--seed", "4", "--out", "run"], d);
    ok(
        &[
            "fit", "--in", "run/blocks.jsonl", "--labels", "run/labels.csv", "--out", "report.json",
            "--cat-params-out", "cats.json",
        ],
        d,
    );
    let cats: CategoryParams = read_json(&d.join("cats.json")).unwrap();
    cats.validate().unwrap();
    assert_eq!(cats.categories.len(), 4);
    ok(&["simulate", "--cat-params", "cats.json", "--blocks", "5", "--entities-per-category", "3", "--out", "again"], d);
}

#[test]
fn attack_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["attack", "--txs", "30", "--trials", "40", "--seed", "2", "--out", "curve.csv"], d);
    ok(&["attack", "--txs", "30", "--trials", "40", "--seed", "2", "--out", "curve2.csv"], d);
    let text = fs::read_to_string(d.join("curve.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(d.join("curve2.csv")).unwrap());
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut n = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let f: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&f));
        n += 1;
    }
    assert_eq!(n, 4 * 30);

    fs::write(d.join("aliases.json"), r#"{"Exchange": {"sizes": [5, 10], "probs": [0.5, 0.5]}}"#).unwrap();
    ok(&["attack", "--aliases", "aliases.json", "--txs", "3", "--trials", "10", "--out", "fixed.csv"], d);
    let fixed = fs::read_to_string(d.join("fixed.csv")).unwrap();
    assert_eq!(fixed.lines().count(), 1 + 3);
    assert!(fixed.lines().skip(1).all(|l| l.starts_with("Exchange,")));

    ok(&["attack", "--axis", "chain", "--txs", "500", "--trials", "10", "--out", "chain.csv"], d);
}

#[test]
fn features_and_classify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--blocks", "120", "--entities-per-category", "12", "--seed", "5", "--out", "run"], d);
    ok(&["features", "--in", "run/blocks.jsonl", "--labels", "run/labels.csv", "--out", "feat/features.csv"], d);
    let schema: Schema = read_json(&d.join("feat/schema.json")).unwrap();
    assert_eq!(schema.columns.len(), 315);
    let m = FeatureMatrix::read_csv(&d.join("feat/features.csv"), &schema.columns).unwrap();
    assert_eq!(m.rows.len(), 48);

    let args = [
        "classify", "--features", "feat/features.csv", "--seed", "1", "--rounds", "40", "--out", "cls/report.json",
        "--confusion-out", "cls/confusion.csv", "--importance-out", "cls/importance.json", "--model-out",
        "cls/model.json",
    ];
    ok(&args, d);
    let report: ClassificationReport = read_json(&d.join("cls/report.json")).unwrap();
    let total: u64 = report.confusion.iter().flatten().sum();
    assert_eq!(total as usize, report.split.as_ref().unwrap().test_rows);
    assert!(report.overall.accuracy > report.overall.majority_baseline);
    assert!(fs::read_to_string(d.join("cls/confusion.csv")).unwrap().starts_with("true\\predicted,"));
    let model = fs::read_to_string(d.join("cls/model.json")).unwrap();
    btmodel::classifier::GbdtModel::from_json(&model).unwrap();

    let first = fs::read(d.join("cls/report.json")).unwrap();
    ok(&args, d);
    assert_eq!(first, fs::read(d.join("cls/report.json")).unwrap());
}

#[test]
fn utxo_cdf_matches_sort_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--model", "address", "--blocks", "10", "--seed", "6", "--out", "run"], d);
    ok(&["report", "utxo-cdf", "--in", "run/blocks.jsonl", "--out", "cdf.csv"], d);

    let blocks = parse_blocks(&d.join("run/blocks.jsonl")).unwrap();
    let mut values: Vec<u64> = blocks
        .iter()
        .flat_map(|b| &b.transactions)
        .filter(|t| t.is_ordinary())
        .flat_map(|t| t.internal_outputs())
        .flat_map(|o| o.values.iter().copied())
        .collect();
    values.sort_unstable();
    let n = values.len() as f64;

    let mut rdr = csv::Reader::from_path(d.join("cdf.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["value_sat", "value_btc", "count", "ccdf", "log10_value_btc", "log10_ccdf"]
    );
    let mut seen = 0u64;
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let v: u64 = r[0].parse().unwrap();
        let above = values.iter().filter(|&&x| x > v).count() as f64;
        let ccdf: f64 = r[3].parse().unwrap();
        assert!((ccdf - above / n).abs() < 1e-12);
        seen += r[2].parse::<u64>().unwrap();
        rows += 1;
    }
    values.dedup();
    assert_eq!(rows, values.len());
    assert_eq!(seen as f64, n);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = btmodel(&["simulate", "--bogus"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = btmodel(&["fit", "--out", "x.json"], d);
    assert_eq!(out.status.code(), Some(2));

    let out = btmodel(&["fit", "--in", "missing.jsonl", "--out", "x.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    fs::write(d.join("bad.jsonl"), "{\"height\":0}\n").unwrap();
    let out = btmodel(&["fit", "--in", "bad.jsonl", "--out", "x.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert!(!d.join("x.json").exists());
}
