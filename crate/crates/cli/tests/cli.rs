use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use immunoscan::{parse_panel_csv, RankFrequencyTable, SimilarityMeasure};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_immunoscan"));
    cmd.env_remove("IMMUNOSCAN_SEED");
    cmd
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn immunoscan")
}

fn synth_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("panel.csv");
    let out = exec(&[
        "synth", "--entities", "8", "--features", "18", "--years", "4", "--outlier", "TGT", "--seed", "7", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn run_fixture(dir: &Path, panel: &Path, name: &str) -> PathBuf {
    let report = dir.join(name).join("report.json");
    let out = exec(&[
        "run", "--panel", panel.to_str().unwrap(), "--self", "SELF", "--n", "0.45", "--trials", "1000", "--seed", "42",
        "--measure", "both", "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    report
}

#[test]
fn run_writes_report_and_rank_tables() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let report_path = run_fixture(dir.path(), &panel, "a");
    let out_dir = report_path.parent().unwrap();

    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 42);
    assert_eq!(report["config"]["trials"], 1000);
    assert_eq!(report["input"]["self_entity"], "SELF");
    assert_eq!(report["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["tool"]["name"], "immunoscan");

    for (file, measure) in [
        ("ranks_euclidean.csv", SimilarityMeasure::EuclideanDistance),
        ("ranks_cosine.csv", SimilarityMeasure::CosineAngle),
    ] {
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        let table = RankFrequencyTable::from_csv(&text, measure).unwrap();
        assert_eq!(table.to_csv(), text);
        assert!(table.is_doubly_stochastic());
        let tgt = table.entities.iter().position(|e| e == "TGT").unwrap();
        let share = table.counts[0][tgt] as f64 / table.trials as f64;
        assert!(share >= 0.95, "{measure:?}: {share}");
    }
    for summary in report["summaries"].as_array().unwrap() {
        let tgt = summary["entities"].as_array().unwrap().iter().find(|e| e["entity"] == "TGT").unwrap();
        assert!(tgt["top1_share"].as_f64().unwrap() >= 0.95);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let a = run_fixture(dir.path(), &panel, "a");
    let b = run_fixture(dir.path(), &panel, "b");
    for file in ["ranks_euclidean.csv", "ranks_cosine.csv"] {
        let x = fs::read(a.parent().unwrap().join(file)).unwrap();
        let y = fs::read(b.parent().unwrap().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn seed_from_environment() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let report = dir.path().join("env.json");
    let out = bin()
        .env("IMMUNOSCAN_SEED", "99")
        .args(["run", "--panel", panel.to_str().unwrap(), "--self", "SELF", "--trials", "5"])
        .args(["--out", report.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 99);
}

#[test]
fn unknown_self_exits_one() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let out = exec(&[
        "run", "--panel", panel.to_str().unwrap(), "--self", "UNKNOWN", "--out",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("entity not found"));
}

#[test]
fn malformed_panel_exits_one() {
    let dir = TempDir::new().unwrap();
    let panel = dir.path().join("bad.csv");
    fs::write(&panel, "entity,year,feature,value\nA,2001,x,1.0\nA,2001,x,2.0\n").unwrap();
    let out = exec(&["baseline", "--panel", panel.to_str().unwrap(), "--self", "A"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_flags_exit_two() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let p = panel.to_str().unwrap();
    for args in [
        vec!["detect", "--panel", p, "--self", "SELF", "--n", "-1"],
        vec!["run", "--panel", p, "--self", "SELF", "--trials", "0", "--out", "x.json"],
        vec!["run", "--panel", p, "--self", "SELF", "--measure", "manhattan", "--out", "x.json"],
        vec!["synth", "--years", "1"],
        vec!["synth", "--entities", "1"],
    ] {
        let out = exec(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn synth_is_deterministic_and_parses() {
    let a = exec(&["synth", "--entities", "8", "--features", "18", "--years", "4", "--outlier", "TGT", "--seed", "7"]);
    let b = exec(&["synth", "--entities", "8", "--features", "18", "--years", "4", "--outlier", "TGT", "--seed", "7"]);
    let c = exec(&["synth", "--seed", "8"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 577);
    let panel = parse_panel_csv(text.as_bytes()).unwrap();
    assert_eq!(panel.dims(), (8, 4, 18));
    assert_eq!(panel.to_csv_string(), text);
}

fn snapshot(panel: &Path, n: &str) -> Value {
    let out = exec(&["detect", "--panel", panel.to_str().unwrap(), "--self", "SELF", "--n", n]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn normalized_self_series(panel: &Path) -> Vec<Vec<f64>> {
    let panel = parse_panel_csv(fs::read(panel).unwrap().as_slice()).unwrap();
    let (_, _, features) = panel.dims();
    (0..features)
        .map(|f| {
            let s = panel.series(0, f);
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            s.iter().map(|v| if hi == lo { 0.0 } else { (v - lo) / (hi - lo) }).collect()
        })
        .collect()
}

#[test]
fn detect_ranges_match_hand_computation() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let snap = snapshot(&panel, "0.45");
    let ranges = snap["ranges"].as_array().unwrap();
    for (f, series) in normalized_self_series(&panel).iter().enumerate() {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64).sqrt();
        let lower = ranges[f]["lower"].as_f64().unwrap();
        let upper = ranges[f]["upper"].as_f64().unwrap();
        assert!((lower - (mean - 0.45 * sd)).abs() <= 1e-12);
        assert!((upper - (mean + 0.45 * sd)).abs() <= 1e-12);
        for (y, v) in series.iter().enumerate() {
            let kept = snap["mask"][y][f].as_bool().unwrap();
            assert_eq!(kept, !(lower <= *v && *v <= upper));
            let accepted = snap["accepted"][y][f].as_f64().unwrap();
            assert_eq!(accepted, if kept { *v } else { 0.0 });
        }
    }
}

#[test]
fn detect_at_zero_span_masks_only_the_mean() {
    let dir = TempDir::new().unwrap();
    let panel = dir.path().join("small.csv");
    // SELF/a normalizes to [0, 0.5, 1] whose mean is 0.5; SELF/b to [0, 0, 1].
    fs::write(
        &panel,
        "entity,year,feature,value\n\
         SELF,2001,a,2.0\nSELF,2001,b,1.0\nSELF,2002,a,4.0\nSELF,2002,b,1.0\nSELF,2003,a,6.0\nSELF,2003,b,5.0\n\
         X,2001,a,1.0\nX,2001,b,3.0\nX,2002,a,2.0\nX,2002,b,2.0\nX,2003,a,3.0\nX,2003,b,1.0\n",
    )
    .unwrap();
    let snap = snapshot(&panel, "0");
    let mask: Vec<Vec<bool>> = serde_json::from_value(snap["mask"].clone()).unwrap();
    assert_eq!(mask, vec![vec![true, true], vec![false, true], vec![true, true]]);

    let fixture = synth_fixture(dir.path());
    let snap = snapshot(&fixture, "0");
    for (f, series) in normalized_self_series(&fixture).iter().enumerate() {
        let mean = snap["stats"]["features"][f]["mean"].as_f64().unwrap();
        for (y, v) in series.iter().enumerate() {
            assert_eq!(snap["mask"][y][f].as_bool().unwrap(), *v != mean);
        }
    }
}

#[test]
fn baseline_csv_lists_every_nonself() {
    let dir = TempDir::new().unwrap();
    let panel = synth_fixture(dir.path());
    let out = exec(&["baseline", "--panel", panel.to_str().unwrap(), "--self", "SELF"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap(), vec!["entity", "r"]);
    let rows: Vec<(String, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|(_, r)| (-1.0..=1.0).contains(r)));
    let lowest = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(lowest.0, "TGT");
}
