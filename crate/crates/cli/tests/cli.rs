use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frfkit_cli::io::parse_samples;
use frfkit_core::bench::f_rat;
use frfkit_core::CircuitSpec;
use tempfile::TempDir;

fn frfkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frfkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = frfkit(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn frat_csv(dir: &TempDir, n: usize) -> PathBuf {
    let p = dir.path().join("frat.csv");
    ok(&[
        "generate",
        "--samples",
        "frat",
        "--n",
        &n.to_string(),
        "--range",
        "0:1",
        "--out",
        s(&p),
    ]);
    p
}

fn summary_value(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
}

#[test]
fn fit_interpolates_frat() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 20);
    let model = dir.path().join("m.json");
    let summary = ok(&[
        "fit",
        s(&csv),
        "--kernel",
        "szego",
        "--symmetric",
        "--out",
        s(&model),
    ]);
    assert!(
        summary_value(&summary, "training residual (max, relative):") <= 1e-8,
        "{summary}"
    );
    assert_eq!(summary_value(&summary, "K:"), 0.0);
}

#[test]
fn malformed_header_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "w,re,im\n0,1,0\n").unwrap();
    let out = frfkit(&["fit", s(&csv), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn bad_row_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "omega,re,im\n0,1,0\n0.5,1,oops\n").unwrap();
    let out = frfkit(&["fit", s(&csv), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn se_separate_rejects_symmetric() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 8);
    let out = frfkit(&[
        "fit",
        s(&csv),
        "--kernel",
        "se-separate",
        "--symmetric",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flags_and_values_exit_2() {
    assert_eq!(frfkit(&["fit"]).status.code(), Some(2));
    assert_eq!(
        frfkit(&[
            "convergence",
            "--method",
            "nope",
            "--target",
            "frat",
            "--n",
            "5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        frfkit(&[
            "convergence",
            "--method",
            "aaa",
            "--target",
            "frat",
            "--n",
            "0..3"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        frfkit(&["predict", "/nonexistent/model.json", "--at", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn predict_reproduces_training_data() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 12);
    let model = dir.path().join("m.json");
    ok(&["fit", s(&csv), "--symmetric", "--out", s(&model)]);
    let train = parse_samples(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    let mut args = vec![
        "predict".to_string(),
        s(&model).to_string(),
        "--at".to_string(),
    ];
    args.extend(train.iter().map(|t| format!("{:e}", t.omega)));
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let pred = parse_samples(&ok(&argv)).unwrap();
    let scale = train.iter().map(|t| t.y.norm()).fold(0.0, f64::max);
    for (p, t) in pred.iter().zip(&train) {
        assert_eq!(p.omega, t.omega);
        assert!((p.y - t.y).norm() <= 1e-8 * scale);
    }
}

#[test]
fn predict_grid_row_count_and_file_output() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 10);
    let model = dir.path().join("m.json");
    ok(&[
        "fit",
        s(&csv),
        "--kernel",
        "se-separate",
        "--out",
        s(&model),
    ]);
    let out = dir.path().join("pred.csv");
    ok(&["predict", s(&model), "--grid", "0:1:201", "--out", s(&out)]);
    let rows = parse_samples(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[200].omega, 1.0);
}

#[test]
fn report_needs_a_hybrid_model() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 8);
    let model = dir.path().join("m.json");
    ok(&["fit", s(&csv), "--symmetric", "--out", s(&model)]);
    let out = frfkit(&["report", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("selection"));
}

#[test]
fn report_flags_the_argmin() {
    let dir = TempDir::new().unwrap();
    let csv = frat_csv(&dir, 12);
    let model = dir.path().join("h.json");
    let summary = ok(&[
        "fit",
        s(&csv),
        "--symmetric",
        "--hybrid",
        "--out",
        s(&model),
    ]);
    let report = ok(&["report", s(&model)]);
    // K_max = min(5, ⌊12/4⌋) = 3.
    let rows: Vec<&str> = report
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("lambda"))
        .collect();
    assert_eq!(rows.len(), 4, "{report}");
    let stab: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            Some((cols[0].parse().ok()?, cols[4].parse().ok()?))
        })
        .collect();
    let argmin = stab
        .iter()
        .fold(stab[0], |b, &r| if r.1 < b.1 { r } else { b })
        .0;
    let flagged: Vec<&&str> = rows.iter().filter(|l| l.ends_with("<- chosen")).collect();
    assert_eq!(flagged.len(), 1);
    assert!(flagged[0].trim_start().starts_with(&argmin.to_string()));
    assert_eq!(summary_value(&summary, "K:") as usize, argmin);
}

#[test]
fn generate_circuit_with_dominant_branches() {
    let a = ok(&["generate", "--circuit", "1000", "--seed", "7", "--dominant"]);
    let b = ok(&["generate", "--circuit", "1000", "--seed", "7", "--dominant"]);
    assert_eq!(a, b);
    let spec: CircuitSpec = serde_json::from_str(&a).unwrap();
    assert_eq!(spec.len(), 1002);
    let last = &spec.branches[1001];
    assert_eq!((last.r, last.l), (0.1, 1e-3));
}

#[test]
fn generate_samples_endpoints() {
    let text = ok(&[
        "generate",
        "--samples",
        "frat",
        "--n",
        "20",
        "--range",
        "0:1",
    ]);
    let rows = parse_samples(&text).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!((rows[0].omega, rows[19].omega), (0.0, 1.0));
    assert_eq!(rows[7].y, f_rat(rows[7].omega));
    assert_eq!(
        frfkit(&["generate", "--samples", "data.csv", "--n", "5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn convergence_table_schema() {
    let out = ok(&[
        "convergence",
        "--method",
        "aaa",
        "--target",
        "frat",
        "--n",
        "1,9,12",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "N,RMSE");
    assert_eq!(lines.len(), 4);
    // AAA needs two points: the row stays, marked NaN.
    assert_eq!(lines[1], "1,NaN");
    for l in &lines[2..] {
        let rmse: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(rmse <= 1e-10, "{l}");
    }
}

#[test]
fn convergence_on_a_file_target() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("table.csv");
    ok(&[
        "generate",
        "--samples",
        "frat",
        "--n",
        "101",
        "--range",
        "0:1",
        "--out",
        s(&table),
    ]);
    let out = ok(&[
        "convergence",
        "--method",
        "aaa",
        "--target",
        s(&table),
        "--n",
        "10,20",
    ]);
    for l in out.lines().skip(1) {
        let rmse: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(rmse <= 1e-10, "{l}");
    }
}
