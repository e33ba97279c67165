use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn selbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selbound"))
        .args(args)
        .env_remove("SELBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let d = dir.to_str().unwrap();
    all.extend(["--out-dir", d]);
    let out = selbound(&all);
    assert!(out.status.success() || out.status.code() == Some(2), "{}", stderr(&out));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// `column -> value` for the rows of a two-column section of stats.csv.
fn stats_column(csv: &str, column: usize) -> BTreeMap<String, f64> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_owned(), f[column].parse().unwrap())
        })
        .collect()
}

#[test]
fn stats_on_table3b() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table3b.csv");
    run_in(dir.path(), &["stats", table.to_str().unwrap()]);
    let means = stats_column(&fs::read_to_string(dir.path().join("stats.csv")).unwrap(), 1);
    // column 2's printed cells (45, 65, 70, 28, 46) sum to 254
    let want = [("1", 52.6), ("2", 50.8), ("3", 59.4), ("4", 60.6)];
    for (id, v) in want {
        assert!((means[id] - v).abs() < 0.05, "{id}: {}", means[id]);
    }
}

#[test]
fn binarized_win_rates_sum_to_one_hundred() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table3b.csv");
    run_in(dir.path(), &["stats", table.to_str().unwrap(), "--binarize"]);
    let rates = stats_column(&fs::read_to_string(dir.path().join("stats.csv")).unwrap(), 3);
    let total: f64 = rates.values().sum();
    assert!((total - 100.0).abs() < 1e-9);
}

#[test]
fn malformed_csv_reports_position() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "instance,a,b\n").unwrap();
    let out = selbound(&["stats", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "instance,a,b\nI1,0.5,0.4\nI2,0.3,oops\n").unwrap();
    let out = selbound(&["stats", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3, column 3"), "{}", stderr(&out));
}

fn case_means(report: &Value) -> Vec<f64> {
    report["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["mean_score_pct"].as_f64().unwrap())
        .collect()
}

fn population_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
}

#[test]
fn single_error_cases_on_table3b() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table3b.csv");
    run_in(dir.path(), &["worst-cases", table.to_str().unwrap(), "--wrong-count", "1"]);
    let report = read_json(&dir.path().join("cases.json"));
    let means = case_means(&report);
    // each case replaces one row maximum of 77.8% by that row's minimum
    let want = [65.8, 71.8, 73.8, 66.0, 69.6];
    assert_eq!(means.len(), want.len());
    for (m, w) in means.iter().zip(want) {
        assert!((m - w).abs() < 1e-9, "{m} vs {w}");
    }
    let var = report["variance_pct2"].as_f64().unwrap();
    assert!((var - population_variance(&want)).abs() < 1e-9);
    assert!((report["best_mean_pct"].as_f64().unwrap() - 77.8).abs() < 1e-9);
}

#[test]
fn zero_errors_is_the_oracle() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table3b.csv");
    run_in(dir.path(), &["worst-cases", table.to_str().unwrap(), "--wrong-count", "0"]);
    let report = read_json(&dir.path().join("cases.json"));
    let means = case_means(&report);
    assert_eq!(means.len(), 1);
    assert!((means[0] - report["best_mean_pct"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(report["variance_pct2"].as_f64().unwrap(), 0.0);
}

#[test]
fn restricted_portfolio_cases() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table3b.csv");
    run_in(
        dir.path(),
        &["worst-cases", table.to_str().unwrap(), "--wrong-count", "1", "--allowed", "1,4"],
    );
    let report = read_json(&dir.path().join("cases.json"));
    assert!((report["best_mean_pct"].as_f64().unwrap() - 69.2).abs() < 1e-9);
    let means = case_means(&report);
    // (52 + 78 + 53 + 44 + 76) / 5
    assert!(means.iter().any(|m| (m - 60.6).abs() < 1e-9), "{means:?}");
}

#[test]
fn enumeration_guard_exit_code() {
    let dir = TempDir::new().unwrap();
    let big = dir.path().join("big.csv");
    let mut csv = String::from("instance,a,b\n");
    for i in 0..21 {
        csv.push_str(&format!("r{i},0.{},0.5\n", i % 9));
    }
    fs::write(&big, csv).unwrap();
    let out = selbound(&["worst-cases", big.to_str().unwrap(), "--wrong-count", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("Monte Carlo"));
}

#[test]
fn random_other_cannot_be_enumerated() {
    let table = fixture("table3b.csv");
    let out = selbound(&["worst-cases", table.to_str().unwrap(), "--wrong-count", "1", "--policy", "random-other"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(selbound(&["stats"]).status.code(), Some(1));
    assert_eq!(selbound(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(selbound(&["--help"]).status.code(), Some(0));
    let table = fixture("table3b.csv");
    let out = selbound(&["sweep", table.to_str().unwrap(), "--step", "0.7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_deterministic_and_ends_at_zero_variance() {
    let table = fixture("table3b.csv");
    let args = ["sweep", table.to_str().unwrap(), "--seed", "42", "--step", "0.1"];
    let a = selbound(&args);
    let b = selbound(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let last = rows.last().unwrap();
    assert_eq!(last[0], 100.0);
    assert_eq!(last[2], 0.0);
    let ends = rows[0][2].max(last[2]);
    assert!(rows[1..rows.len() - 1].iter().any(|r| r[2] > ends));
}

#[test]
fn seed_comes_from_environment() {
    let table = fixture("table3b.csv");
    let run = |seed: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_selbound"));
        cmd.args(["sweep", table.to_str().unwrap(), "--step", "0.25"]).args(extra);
        match seed {
            Some(s) => cmd.env("SELBOUND_SEED", s),
            None => cmd.env_remove("SELBOUND_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("17"), &[]), run(None, &["--seed", "17"]));
    assert_ne!(run(Some("17"), &[]), run(None, &[]));
    assert_eq!(run(Some("17"), &["--seed", "3"]), run(None, &["--seed", "3"]));
}

#[test]
fn table5_literal_bound_is_about_93() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table5.csv");
    run_in(dir.path(), &["bound", table.to_str().unwrap(), "--mode", "lemma-literal", "--grid-step", "0.01"]);
    let report = read_json(&dir.path().join("bound.json"));
    assert!(report["feasible"].as_bool().unwrap());
    assert!((report["sigma_best_pct"].as_f64().unwrap() - 92.5).abs() < 1e-9);
    let min = report["min_accuracy_pct"].as_f64().unwrap();
    assert!((min - 93.0).abs() <= 1.0 + 1e-9, "{min}");
}

#[test]
fn binary_bound_on_table2() {
    let dir = TempDir::new().unwrap();
    let table = fixture("table2.csv");
    run_in(dir.path(), &["bound", table.to_str().unwrap(), "--mode", "binary"]);
    let report = read_json(&dir.path().join("bound.json"));
    assert!((report["min_accuracy_pct"].as_f64().unwrap() - 28.0).abs() < 1e-9);
    let total: f64 = report["win_rates_pct"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 100.0).abs() < 1e-9);

    let raw = fixture("table3b.csv");
    assert_eq!(selbound(&["bound", raw.to_str().unwrap(), "--mode", "binary"]).status.code(), Some(1));
    assert!(selbound(&["bound", raw.to_str().unwrap(), "--mode", "binary", "--binarize"]).status.success());
}

#[test]
fn single_column_is_feasible_at_zero() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(&one, "instance,only\na,0.3\nb,0.9\nc,0.45\n").unwrap();
    let out = dir.path().join("out");
    run_in(&out, &["bound", one.to_str().unwrap(), "--mode", "lemma-score", "--grid-step", "0.1"]);
    let report = read_json(&out.join("bound.json"));
    assert!(report["feasible"].as_bool().unwrap());
    assert_eq!(report["min_accuracy_pct"].as_f64().unwrap(), 0.0);
}

/// `label -> (result, matched, truth, reduced f)` from eval.csv.
fn eval_rows(dir: &Path) -> BTreeMap<u32, (u64, u64, u64, f64)> {
    fs::read_to_string(dir.join("eval.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with("mean"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[5].parse().unwrap()),
            )
        })
        .collect()
}

fn eval_into(dir: &Path, result: &str, truth: &str) -> BTreeMap<u32, (u64, u64, u64, f64)> {
    let (r, t) = (fixture(result), fixture(truth));
    run_in(dir, &["eval", r.to_str().unwrap(), t.to_str().unwrap()]);
    eval_rows(dir)
}

#[test]
fn eval_identical_and_disjoint_maps() {
    let dir = TempDir::new().unwrap();
    let same = eval_into(&dir.path().join("same"), "maps/identical_a.map", "maps/identical_b.map");
    assert!(!same.is_empty());
    assert!(same.values().all(|r| r.3 == 1.0));

    let apart = eval_into(&dir.path().join("apart"), "maps/disjoint_result.map", "maps/disjoint_truth.map");
    assert!(!apart.is_empty());
    assert!(apart.values().all(|r| r.3 == 0.0));
}

fn parse_map(path: &Path) -> Vec<Vec<u32>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn eval_eight_by_eight_matches_scan() {
    let dir = TempDir::new().unwrap();
    let rows = eval_into(dir.path(), "maps/result_8x8.map", "maps/truth_8x8.map");
    let result = parse_map(&fixture("maps/result_8x8.map"));
    let truth = parse_map(&fixture("maps/truth_8x8.map"));
    for (&label, &(r, m, g, red)) in &rows {
        let (mut rr, mut mm, mut gg) = (0, 0, 0);
        for (ra, ta) in result.iter().zip(&truth) {
            for (&a, &b) in ra.iter().zip(ta) {
                rr += (a == label) as u64;
                gg += (b == label) as u64;
                mm += (a == label && b == label) as u64;
            }
        }
        assert_eq!((r, m, g), (rr, mm, gg));
        assert!((red - mm as f64 / gg as f64).abs() < 1e-9);
    }
}

#[test]
fn eval_dimension_mismatch() {
    let (a, b) = (fixture("maps/result_8x8.map"), fixture("maps/identical_a.map"));
    let out = selbound(&["eval", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

fn last_exit(trace: &str) -> (u64, String) {
    let rec: Value = serde_json::from_str(trace.lines().last().unwrap()).unwrap();
    assert_eq!(rec["event_type"], "exit");
    (rec["iteration"].as_u64().unwrap(), rec["payload"]["reason"].as_str().unwrap().to_owned())
}

#[test]
fn asm_demo_scenarios() {
    let cases = [
        ("no-contradiction", 0, "no-contradiction"),
        ("stuck-hypothesis", 1, "repeated-hypothesis"),
        ("repeat-algorithm", 0, "repeated-algorithm"),
        ("three-fixes", 3, "no-contradiction"),
        ("oscillating-hypothesis", 16, "iteration-limit"),
    ];
    for (name, iteration, reason) in cases {
        let file = fixture(&format!("scenarios/{name}.json"));
        let out = selbound(&["asm-demo", file.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        let trace = String::from_utf8(out.stdout).unwrap();
        for line in trace.lines() {
            let rec: Value = serde_json::from_str(line).unwrap();
            assert!(rec.get("iteration").is_some() && rec.get("event_type").is_some() && rec.get("payload").is_some());
        }
        assert_eq!(last_exit(&trace), (iteration, reason.to_owned()), "{name}");
    }
}

#[test]
fn asm_demo_unknown_scenario() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("s.json");
    fs::write(&file, r#"{"scenario": "nope"}"#).unwrap();
    let out = selbound(&["asm-demo", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("three-fixes"));
}

fn manifest_outputs(dir: &Path) -> Vec<String> {
    read_json(&dir.join("manifest.json"))["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn replay_reproduces_every_command() {
    let dir = TempDir::new().unwrap();
    let t3 = fixture("table3b.csv");
    let t3 = t3.to_str().unwrap();
    let (r, t) = (fixture("maps/result_8x8.map"), fixture("maps/truth_8x8.map"));
    let scen = fixture("scenarios/three-fixes.json");
    let commands: Vec<Vec<&str>> = vec![
        vec!["stats", t3],
        vec!["worst-cases", t3, "--wrong-count", "2"],
        vec!["sweep", t3, "--seed", "7", "--step", "0.1", "--error-model", "bernoulli"],
        vec!["bound", t3, "--grid-step", "0.05", "--policy", "random-other"],
        vec!["eval", r.to_str().unwrap(), t.to_str().unwrap()],
        vec!["asm-demo", scen.to_str().unwrap()],
    ];
    for (k, args) in commands.iter().enumerate() {
        let first = dir.path().join(format!("run{k}"));
        let again = dir.path().join(format!("replay{k}"));
        run_in(&first, args);
        let manifest = first.join("manifest.json");
        let out = selbound(&["replay", manifest.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        let names = manifest_outputs(&first);
        assert!(!names.is_empty());
        for name in names.iter().chain(std::iter::once(&"manifest.json".to_owned())) {
            assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn replay_ignores_environment_seed() {
    let dir = TempDir::new().unwrap();
    let t3 = fixture("table3b.csv");
    let first = dir.path().join("first");
    let seeded = Command::new(env!("CARGO_BIN_EXE_selbound"))
        .args(["sweep", t3.to_str().unwrap(), "--step", "0.2", "--out-dir", first.to_str().unwrap()])
        .env("SELBOUND_SEED", "99")
        .output()
        .unwrap();
    assert!(seeded.status.success());
    assert_eq!(read_json(&first.join("manifest.json"))["args"]["trials"]["seed"], 99);
    let again = dir.path().join("again");
    let out = selbound(&["replay", first.join("manifest.json").to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn replay_detects_changes() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("m.csv");
    fs::copy(fixture("table3b.csv"), &input).unwrap();
    let first = dir.path().join("first");
    run_in(&first, &["stats", input.to_str().unwrap()]);
    let manifest = first.join("manifest.json");

    let mut doctored = read_json(&manifest);
    doctored["outputs"][0]["sha256"] = Value::from("0".repeat(64));
    let fake = dir.path().join("fake.json");
    fs::write(&fake, serde_json::to_string(&doctored).unwrap()).unwrap();
    let out = selbound(&["replay", fake.to_str().unwrap(), "--out-dir", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(&input, "instance,1,2\nx,0.1,0.2\n").unwrap();
    let out = selbound(&["replay", manifest.to_str().unwrap(), "--out-dir", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("changed"));
}
