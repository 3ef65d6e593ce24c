mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nsbell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsbell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn entries(v: &Value) -> Vec<f64> {
    v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn project_pipeline_matches_direct_on_table1() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "table1.csv", &common::table1_csv());
    let mut outs = Vec::new();
    for method in ["pipeline", "direct"] {
        let out = dir.path().join(format!("{method}.json"));
        let o = nsbell(&[
            "project",
            "--scenario",
            "2,2",
            "--input",
            &input,
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let doc = read_json(&out);
        assert_eq!(doc["method"], method);
        assert!(doc["residual"]["nosig_max"].as_f64().unwrap() <= 1e-12);
        assert!(doc["residual"]["norm_max"].as_f64().unwrap() <= 1e-12);
        assert_eq!(doc["flags"]["negative_entries"], false);
        outs.push(entries(&doc));
    }
    assert!(common::max_abs_diff(&outs[0], &outs[1]) <= 1e-10);
}

#[test]
fn project_every_method_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "table1.csv", &common::table1_csv());
    for method in ["weighted", "nonneg", "ml"] {
        let o = nsbell(&[
            "project",
            "--scenario",
            "2,2",
            "--input",
            &input,
            "--method",
            method,
        ]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        assert!(stdout(&o).contains("residual nosig_max"));
    }
}

#[test]
fn project_grid_input_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid: String = nsbell::data::TABLE1
        .iter()
        .map(|r| format!("{},{},{},{}\n", r[0], r[1], r[2], r[3]))
        .collect();
    let input = write(dir.path(), "grid.csv", &grid);
    let out = dir.path().join("p.csv");
    let o = nsbell(&[
        "project",
        "--grid222",
        "--input",
        &input,
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,a1,a2,value"));
    assert_eq!(lines.count(), 16);
}

#[test]
fn evaluate_chsh_on_table1() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "table1.csv", &common::table1_csv());
    let o = nsbell(&[
        "evaluate",
        "--expr",
        "chsh",
        "--scenario",
        "2,2",
        "--input",
        &input,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let raw = text.lines().find(|l| l.starts_with("raw:")).unwrap();
    let projected = text.lines().find(|l| l.starts_with("projected:")).unwrap();
    for line in [raw, projected] {
        assert!(line.contains("value 2.00112912407"), "{line}");
        assert!(line.ends_with("violated"), "{line}");
    }
}

#[test]
fn canonicalize_tilted_file() {
    let dir = tempfile::tempdir().unwrap();
    let expr = r#"{
        "scenario": {"n": 2, "m": 2},
        "name": "tilted_a2_b1",
        "terms": [
            {"kind": "corr", "I": [1], "xI": [0], "coef": 1},
            {"kind": "corr", "I": [1, 2], "xI": [0, 0], "coef": 2},
            {"kind": "corr", "I": [1, 2], "xI": [0, 1], "coef": 2},
            {"kind": "corr", "I": [1, 2], "xI": [1, 0], "coef": 1},
            {"kind": "corr", "I": [1, 2], "xI": [1, 1], "coef": -1}
        ],
        "bound": 5,
        "direction": "le"
    }"#;
    let path = write(dir.path(), "tilted_a2_b1.json", expr);
    let out = dir.path().join("canon.json");
    let o = nsbell(&[
        "canonicalize",
        "--expr-file",
        &path,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    // w = (r + 4s)/2 = (2.5, -1.5, -2.5, 1.5) on p00 and p01; s on p10; -s on p11.
    let w = "[2.50000000000, -1.50000000000, -2.50000000000, 1.50000000000]";
    assert!(text.contains(&format!("x=[0, 0]: {w}")), "{text}");
    assert!(text.contains(&format!("x=[0, 1]: {w}")), "{text}");
    assert!(
        text.contains("x=[1, 0]: [1.00000000000, -1.00000000000, -1.00000000000, 1.00000000000]")
    );
    assert!(
        text.contains("x=[1, 1]: [-1.00000000000, 1.00000000000, 1.00000000000, -1.00000000000]")
    );

    // The written canonical form reads back as an expression.
    let back: nsbell::bell::BellExpression =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back.bound(), 5.0);
}

#[test]
fn diagnose_reports_caption_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "table1.csv", &common::table1_csv());
    let out = dir.path().join("report.json");
    let o = nsbell(&[
        "diagnose",
        "--scenario",
        "2,2",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("trials per setting [1250580, 1249152, 1249656, 1250612]"),
        "{text}"
    );
    assert!(
        text.contains("0.00401173855331 vs 0.00398270186495"),
        "{text}"
    );
    let doc = read_json(&out);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 8);
    assert!(doc["max_abs"].as_f64().unwrap() > 0.0);
}

#[test]
fn generate_is_deterministic_and_drift_signals() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("g{k}.csv"));
        let o = nsbell(&[
            "generate",
            "--scenario",
            "2,2",
            "--trials",
            "100000",
            "--drift",
            "0.05",
            "--blocks",
            "4",
            "--seed",
            "7",
            "--mode",
            "sampled",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        texts.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);

    let path = dir.path().join("g0.csv");
    let o = nsbell(&[
        "diagnose",
        "--scenario",
        "2,2",
        "--input",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("no-signalling residuals"))
        .unwrap()
        .to_owned();
    let max: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(max > 0.0, "{line}");
}

#[test]
fn validation_errors_exit_one_with_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "table1.csv", &common::table1_csv());
    let bad = write(dir.path(), "bad.csv", "x1,x2,a1,a2,count\n0,0,0,0,-3\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["project", "--nope"],
        vec![
            "evaluate",
            "--expr",
            "mermin",
            "--scenario",
            "2,2",
            "--input",
            &input,
        ],
        vec!["project", "--scenario", "2,2", "--input", &bad],
        vec![
            "project",
            "--scenario",
            "2,2",
            "--input",
            "/nonexistent/file.csv",
        ],
        vec!["canonicalize", "--expr", "tilted", "--alpha", "0.5"],
        vec!["project", "--scenario", "3,2", "--input", &input],
    ];
    for args in cases {
        let o = nsbell(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert!(err.starts_with("error: "), "{args:?}: {err}");
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
    }
}
