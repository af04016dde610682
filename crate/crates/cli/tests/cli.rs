use std::path::PathBuf;
use std::process::{Command, Output};

use rsgbm_core::{reference, GeneratorPolicy, RegimeModel};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn rsgbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsgbm")).args(args).output().expect("spawn rsgbm")
}

fn ok(args: &[&str]) -> String {
    let out = rsgbm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn model_check_accepts_good_and_rejects_bad_generators() {
    let shen = config("shen.toml");
    ok(&["model", "check", shen.to_str().unwrap()]);
    let bad = rsgbm(&["model", "check", config("bad.toml").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("generator"));
    let missing = rsgbm(&["model", "check", "/nonexistent/model.toml"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(rsgbm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rsgbm(&["price", config("shen.toml").to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(rsgbm(&["--help"]).status.code(), Some(0));
}

#[test]
fn bundled_shen_config_matches_the_reference_model() {
    let file = RegimeModel::from_file(config("shen.toml"), GeneratorPolicy::Exact).unwrap();
    let builtin = reference::shen_model();
    assert_eq!(file.generator(), builtin.generator());
    for i in 0..2 {
        assert_eq!(file.mu(i), builtin.mu(i));
        assert_eq!(file.cov(i), builtin.cov(i));
        assert_eq!(file.rate(i), builtin.rate(i));
    }
}

#[test]
fn auxfn_dump_has_one_row_per_point_ending_at_beta_t() {
    let text = ok(&["auxfn", "dump", config("shen.toml").to_str().unwrap(), "--T", "1", "--points", "200"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 200);
    let last = &rows[199];
    let t: f64 = last[0].parse().unwrap();
    let b1: f64 = last[5].parse().unwrap();
    let b2: f64 = last[6].parse().unwrap();
    assert_eq!(t, 1.0);
    assert!((b1 - 0.9767).abs() < 1e-4 && (b2 - 0.9644).abs() < 1e-4, "{b1} {b2}");
}

#[test]
fn price_csv_and_json_agree_and_runs_are_deterministic() {
    let shen = config("shen.toml");
    let args = ["price", shen.to_str().unwrap(), "--strike", "90,100", "--pairs", "5000", "--seed", "3"];
    let csv_text = ok(&args);
    assert_eq!(csv_text, ok(&args));
    let mut json_args = args.to_vec();
    json_args.push("--json");
    let json: Value = serde_json::from_str(&ok(&json_args)).unwrap();
    let rows = csv_rows(&csv_text);
    let arr = json.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(arr.len(), 4);
    for (r, j) in rows.iter().zip(arr) {
        let (c, j) = (r[3].parse::<f64>().unwrap(), j["value"].as_f64().unwrap());
        assert!((c - j).abs() <= 1e-12 * c.abs(), "{c} vs {j}");
    }
    let other = ok(&["price", shen.to_str().unwrap(), "--strike", "90,100", "--pairs", "5000", "--seed", "4"]);
    assert_ne!(csv_text, other);
}

#[test]
fn fourier_and_monte_carlo_prices_agree() {
    let shen = config("shen.toml");
    let p = shen.to_str().unwrap();
    let fourier = csv_rows(&ok(&["price", p, "--strike", "100", "--method", "fourier"]));
    let mc = csv_rows(&ok(&["price", p, "--strike", "100", "--pairs", "50000"]));
    for (f, m) in fourier.iter().zip(&mc) {
        let (fv, mv, hw): (f64, f64, f64) = (f[3].parse().unwrap(), m[3].parse().unwrap(), m[4].parse().unwrap());
        assert!((fv - mv).abs() < 1.5 * hw, "{fv} vs {mv} +- {hw}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let shen = config("shen.toml");
    let args = |t: &'static str| ["price", "--threads", t, "--pairs", "20000", "--strike", "100"].map(String::from);
    let run = |t: &'static str| {
        let mut a: Vec<String> = args(t).to_vec();
        a.insert(1, shen.to_str().unwrap().to_string());
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn hedge_writes_summary_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.csv");
    let summary = dir.path().join("summary.json");
    ok(&[
        "hedge",
        config("shen.toml").to_str().unwrap(),
        "--strike",
        "100",
        "--steps",
        "20",
        "--paths",
        "200",
        "--dump",
        dump.to_str().unwrap(),
        "--json",
        "--out",
        summary.to_str().unwrap(),
    ]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(doc["n_paths"], 200);
    assert!((doc["initial_price"].as_f64().unwrap() - 15.636).abs() < 1e-2);
    assert_eq!(doc["checkpoints"].as_array().unwrap().len(), 4);
    let rows = csv_rows(&std::fs::read_to_string(&dump).unwrap());
    assert_eq!(rows.len(), 200 * 21);
    assert_eq!(rows[0][7], "0.0");
}

#[test]
fn reproduce_tables_have_published_columns() {
    let text = ok(&["reproduce", "shen-table2", "--pairs", "2000"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 12);
    assert!(text.starts_with("strike,regime,value,half_width,phi0"));
    let t6 = csv_rows(&ok(&["reproduce", "apple-table6"]));
    for r in &t6 {
        let (mine, published): (f64, f64) = (r[1].parse().unwrap(), r[3].parse().unwrap());
        assert!((mine - published).abs() < 1e-3, "{r:?}");
    }
}

#[test]
fn simulate_dump_starts_and_ends_each_path() {
    let text = ok(&["simulate", "dump", config("apple.toml").to_str().unwrap(), "--T", "0.08", "--paths", "3", "--s0", "129.95"]);
    let rows = csv_rows(&text);
    for p in 0..3 {
        let path: Vec<_> = rows.iter().filter(|r| r[0] == p.to_string()).collect();
        assert_eq!(path.first().unwrap()[1], "0.0");
        assert_eq!(path.last().unwrap()[1], "0.08");
    }
}
