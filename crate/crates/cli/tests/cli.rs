use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qem")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const NELSON: &str = "lower,upper,count\n\
0,6.12,5\n6.12,19.92,16\n19.92,29.64,12\n29.64,35.40,18\n35.40,39.72,18\n\
39.72,45.24,2\n45.24,52.32,6\n52.32,63.48,17\n63.48,inf,73\n";

#[test]
fn grouped_weibull_fit_prints_estimates() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "nelson.csv", NELSON);
    let o = qem(&["fit", "--model", "weibull", "--data", s(&data), "--grouped", "--init", "1,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("weibull"));
    assert!(out.contains("converged   true"), "{out}");
    assert!(out.contains("0.00174"), "{out}");
}

#[test]
fn json_output_round_trips_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "lower,upper\n1.2,1.2\n3,inf\n0.5,2\n4.1,4.1\n");
    let o = qem(&[
        "fit", "--model", "normal", "--data", s(&data), "--strategy", "mcem", "--k", "50",
        "--seed", "7", "--init", "2,2", "--output", "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value: qem::FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(value.seed, Some(7));
    assert_eq!(serde_json::to_string_pretty(&value).unwrap(), text.trim_end());
}

#[test]
fn trace_has_a_row_per_iteration() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "lower,upper\n12,12\n30,inf\n8,8\n");
    let o = qem(&[
        "fit", "--model", "exponential", "--data", s(&data), "--strategy", "em", "--max-iter", "3",
        "--init", "1", "--trace",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows = out.lines().skip_while(|l| !l.trim_start().starts_with("s ")).skip(1);
    assert_eq!(rows.filter(|l| !l.trim().is_empty()).count(), 4, "{out}");
}

#[test]
fn malformed_data_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "bad.csv", "lower,upper\n1,abc\n");
    let o = qem(&["fit", "--model", "exponential", "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(3));
    let reversed = write(&dir, "rev.csv", "lower,upper\n5,2\n");
    let o = qem(&["fit", "--model", "exponential", "--data", s(&reversed)]);
    assert_eq!(o.status.code(), Some(3));
    let o = qem(&["fit", "--model", "exponential", "--data", "/nonexistent/data.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_usage_exits_2() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "lower,upper\n1,1\n2,3\n");
    let o = qem(&["fit", "--model", "exponential", "--data", s(&data), "--strategy", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
    let o = qem(&["fit", "--model", "laplace", "--data", s(&data), "--strategy", "em"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = qem(&["fit", "--model", "normal", "--data", s(&data), "--init", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qem(&["fit", "--model", "exponential", "--data", s(&data), "--strategy", "qem", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_fit_exits_4() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "lower,upper\n2,2\n2,2\n2,2\n");
    let o = qem(&["fit", "--model", "normal", "--data", s(&data), "--strategy", "em", "--init", "2,1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn simulate_writes_tables() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "study.conf",
        "# tiny study\nmodel = rayleigh\nparams = 10\nn = 10\nr = 3\nreplications = 1\n\
         cells = mcem:20, qem:20\niterations = 3\nseed = 5\n",
    );
    let out = dir.path().join("out");
    let o = qem(&["simulate", "--config", s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("study.csv")).unwrap();
    assert!(csv.starts_with("strategy,k,parameter,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("study.txt").exists());
}

#[test]
fn simulate_names_a_missing_key() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "c.conf", "model = normal\nparams = 50, 5\nn = 20\nr = 5\ncells = em:1\niterations = 10\n");
    let o = qem(&["simulate", "--config", s(&config), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replications"), "{}", stderr(&o));
}

#[test]
fn fixtures_report_compares_with_reference_values() {
    let o = qem(&["fixtures", "--name", "gupta"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("gupta"));
    assert!(out.contains("1.7422") || out.contains("1.74223"), "{out}");
    let o = qem(&["fixtures", "--name", "missing"]);
    assert_eq!(o.status.code(), Some(2));
}
