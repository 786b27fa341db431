use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use twinmeta_cli::report::AnalysisReport;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn twinmeta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinmeta"))
        .args(args)
        .env_remove("TWINMETA_CONFIG")
        .output()
        .unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("stderr line");
    serde_json::from_str(last).unwrap()
}

#[test]
fn analyze_report_roundtrip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("glow.json");
    let glow = data("glow.csv");
    let out = twinmeta(&[
        "analyze",
        "--input",
        glow.to_str().unwrap(),
        "--methods",
        "fe,re,hksj,mkh,bayes",
        "--hn-scale",
        "10,20,50",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let parsed: AnalysisReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.pair.pair_id, "GLOW");
    assert_eq!(parsed.effects.len(), 7);
    assert_eq!(parsed.heterogeneity[0].result.tau_hat, 0.0);
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);

    let replay = twinmeta(&["analyze", "--replay", report.to_str().unwrap()]);
    assert!(replay.status.success());
    let again: AnalysisReport = serde_json::from_slice(&replay.stdout).unwrap();
    assert_eq!(again.effects, parsed.effects);
    assert_eq!(again.heterogeneity, parsed.heterogeneity);
}

#[test]
fn replay_rejects_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("in.csv");
    std::fs::copy(data("glow.csv"), &csv).unwrap();
    let report = dir.path().join("r.json");
    assert!(twinmeta(&["analyze", "--input", csv.to_str().unwrap(), "--out", report.to_str().unwrap()])
        .status
        .success());
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str("\n");
    std::fs::write(&csv, text).unwrap();
    let out = twinmeta(&["analyze", "--replay", report.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "input");
}

#[test]
fn events_csv_has_full_precision_and_convention() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let svg = dir.path().join("e.svg");
    let out = twinmeta(&[
        "events",
        "--ratio-grid",
        "0:2:0.5",
        "--convention",
        "table1",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().last(), Some("convention"));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let overlap = headers.iter().position(|h| h == "overlap").unwrap();
    let cell = &rows[0][overlap];
    let mantissa = cell.split('e').next().unwrap().replace('.', "");
    assert!(mantissa.len() >= 10, "{cell}");
    assert!((cell.parse::<f64>().unwrap() - 0.994).abs() < 5e-4);
    assert_eq!(&rows[0][headers.len() - 1], "paper-table1-tau2");
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<?xml") || svg_text.starts_with("<svg"));
    assert!(svg_text.contains("paper-table1-tau2"));
}

#[test]
fn simulate_writes_z_scores() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = twinmeta(&[
        "simulate", "--tau", "1", "--reps", "20000", "--seed", "4", "--event", "overlap,zero_tau",
        "--csv", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let z = headers.iter().position(|h| h == "z_model_2tau2").unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r[z].parse::<f64>().unwrap().abs() < 4.0);
    }
}

#[test]
fn corpus_summary_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("c.json");
    let csv = dir.path().join("p.csv");
    let out = twinmeta(&[
        "corpus",
        "--input",
        data("respire.csv").to_str().unwrap(),
        "--joint",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["summary"]["n_pairs"], 2);
    assert!(v["joint"]["bayes_factor_01"].as_f64().unwrap() > 0.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn forest_plot() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("f.svg");
    let out = twinmeta(&[
        "forest",
        "--input",
        data("respire.csv").to_str().unwrap(),
        "--pair-id",
        "RESPIRE-14d",
        "--methods",
        "fe,re,bayes",
        "--hn-scale",
        "0.5",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains("RESPIRE1") && text.contains("HN(0.5)"));
}

#[test]
fn errors_are_json_lines() {
    let out = twinmeta(&["analyze", "--input", "/nonexistent/x.csv"]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "io");

    let out = twinmeta(&["analyze", "--input", data("respire.csv").to_str().unwrap()]);
    let e = error_line(&out);
    assert_eq!(e["error"], "input");
    assert!(e["message"].as_str().unwrap().contains("--pair-id"));

    let out = twinmeta(&["events", "--tau=-1"]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "domain");
}

#[test]
fn bad_rows_are_reported_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "pair_id,study_label,estimate,se,ci_lower,ci_upper,measure,scale,n\nA,a,1.0,0.5,,,MD,,\nA,b,2.0,-1,,,MD,,\n",
    )
    .unwrap();
    let out = twinmeta(&["analyze", "--input", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = error_line(&out)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("row 3"), "{msg}");
}

#[test]
fn partial_outputs_removed_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let svg = dir.path().join("e.svg");
    // the CSV is written first, then the SVG step fails on unequal errors
    let out = twinmeta(&[
        "events", "--tau", "1", "--sigma1", "1", "--sigma2", "2", "--csv", csv.to_str().unwrap(),
        "--svg", svg.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!csv.exists());
    assert!(!svg.exists());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("twinmeta.toml");
    std::fs::write(&cfg, "convention = \"table1\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_twinmeta"))
        .args(["events", "--tau", "1"])
        .env("TWINMETA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("paper-table1-tau2") && stdout.contains("97.6%"), "{stdout}");

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_twinmeta"))
        .args(["events", "--tau", "1"])
        .env("TWINMETA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(error_line(&out)["error"], "config");
}
