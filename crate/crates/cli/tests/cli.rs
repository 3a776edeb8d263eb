use std::path::Path;
use std::process::{Command, Output};

use qpurify::format::load_table;
use qpurify::Control;

const COARSE: [&str; 4] = ["--dt", "0.01", "--dr", "0.004"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpurify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn solve(dir: &Path, eta: &str) -> String {
    let prefix = dir.join(format!("eta{eta}"));
    let p = prefix.to_str().unwrap().to_string();
    let mut args = vec!["solve", "--eta", eta, "--out", &p];
    args.extend(COARSE);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn solve_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = solve(dir.path(), "0.3");
    let table = load_table(Path::new(&format!("{prefix}.table"))).unwrap();
    assert_eq!(table.steps(), 150);
    assert_eq!(table.points(), 251);
    assert!(Path::new(&format!("{prefix}.cost")).exists());
}

#[test]
fn solve_reports_the_global_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let mut args = vec!["solve", "--eta", "0.3", "--out", out.to_str().unwrap()];
    args.extend(COARSE);
    let text = stdout(&run(&args));
    let c: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("C_g(r0=0) = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((c - 0.331).abs() < 0.01, "{c}");
}

#[test]
fn perfect_efficiency_table_is_all_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = solve(dir.path(), "1");
    let table = load_table(Path::new(&format!("{prefix}.table"))).unwrap();
    assert_eq!(table.count(Control::NoFeedback), 0);
    let text = std::fs::read_to_string(format!("{prefix}.table")).unwrap();
    let body: Vec<&str> = text.lines().skip_while(|l| *l != "data").skip(1).collect();
    assert!(body.iter().all(|l| l.chars().all(|c| c == '0')));
}

#[test]
fn out_of_range_efficiency_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = run(&["solve", "--eta", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--strategy", "u0"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let o = run(&["solve", "--eta", "0.3", "--dt", "0.05", "--dr", "0.01", "--out", "/nonexistent/dir/t"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn single_feedback_trajectory_is_exact() {
    let o = run(&["simulate", "--strategy", "u0", "--eta", "0.3", "--k", "1", "--T", "1.5", "--n", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# command: simulate"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 301);
    let last = rows.last().unwrap();
    assert!((last[1] - 0.533_913_74).abs() < 1e-8);
    assert_eq!(last[2], 0.0);
}

#[test]
fn blind_measurement_keeps_the_radius() {
    let o = run(&["simulate", "--strategy", "u1", "--eta", "0", "--r0", "0.4", "--n", "100"]);
    assert!(o.status.success());
    for row in data_rows(&stdout(&o)) {
        assert_eq!(row[1], 0.4);
        assert_eq!(row[2], 0.0);
    }
}

#[test]
fn global_strategy_needs_a_matching_table() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = solve(dir.path(), "0.3");
    assert_eq!(run(&["simulate", "--strategy", "global"]).status.code(), Some(2));
    let o = run(&["simulate", "--strategy", "global", "--table", &prefix, "--eta", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--strategy", "global", "--table", "/nonexistent.table"]);
    assert_eq!(o.status.code(), Some(3));

    let csv = dir.path().join("global.csv");
    let table = format!("{prefix}.table");
    let o = run(&[
        "simulate", "--strategy", "global", "--table", &table, "--n", "500", "--seed", "3",
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("C_MC="));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# strategy: global"));
    assert!(text.contains("# seed: 3"));
    assert_eq!(data_rows(&text).len(), 151);
}

#[test]
fn malformed_table_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.table");
    let header = "kind=control-table\nversion=0.1.0\neta=oops\nk=1\nT=1\nM=1\nN=2\ndt=1\ndr=1\nsigma=1\nseed=0\ndata\n01\n";
    std::fs::write(&path, header).unwrap();
    let o = run(&["simulate", "--strategy", "global", "--table", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["simulate", "--strategy", "u1", "--eta", "0.3", "--n", "300", "--dt", "0.05"];
    let one = run(&[&base[..], &["--threads", "1"]].concat());
    let three = run(&[&base[..], &["--threads", "3"]].concat());
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn validate_prints_one_row_per_efficiency() {
    let mut args = vec!["validate", "--etas", "0.5:0.9:0.4", "--n", "2000"];
    args.extend(COARSE);
    let o = run(&args);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "eta,C_g,C_MC,dC_MC,Delta,pass");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0.5,") && rows[2].starts_with("0.9,"));
    let all_pass = rows[1..].iter().all(|r| r.ends_with(",true"));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 4 }));
}

#[test]
fn error_analysis_without_boundary_is_empty() {
    let mut args = vec!["error-analysis", "--eta", "0"];
    args.extend(COARSE);
    let o = run(&args);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# no feedback boundary"));
    assert!(data_rows(&text).is_empty());
    assert!(text.contains("# refinement: stable"));
}

#[test]
fn error_analysis_series_for_a_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("err.csv");
    let mut args = vec!["error-analysis", "--eta", "0.3", "--out", csv.to_str().unwrap()];
    args.extend(COARSE);
    let o = run(&args);
    assert!(stdout(&o).starts_with("refinement: "));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows = data_rows(&text);
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r[0] > 1.0 && r[0] < 1.5);
        assert!(r[2] >= 0.0 && (r[3] - r[2] / 0.004).abs() < 1e-9 * r[3].max(1.0));
    }
}

#[test]
fn compare_lists_every_strategy() {
    let mut args = vec!["compare", "--eta", "0.3", "--n", "500"];
    args.extend(COARSE);
    let o = run(&args);
    assert!(o.status.success());
    let text = stdout(&o);
    let names: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, ["u0", "u1", "local", "global"]);
}
