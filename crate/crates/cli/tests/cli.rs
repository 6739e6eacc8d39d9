use std::path::Path;
use std::process::{Command, Output};

use bosonize_cli::table::{ResultTable, Value};

fn bosonize(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosonize")).args(args).output().expect("binary runs")
}

fn json_table(args: &[&str]) -> ResultTable {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let out = bosonize(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    ResultTable::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn floats(t: &ResultTable, col: &str) -> Vec<f64> {
    t.column(col)
        .unwrap()
        .into_iter()
        .map(|v| match v {
            Value::Float(x) => *x,
            Value::Int(i) => *i as f64,
            other => panic!("{col}: {other:?}"),
        })
        .collect()
}

#[test]
fn lune_kf2_1() {
    let t = json_table(&["lune", "--kf2", "1", "--k", "1,0,0"]);
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.column("lune_size").unwrap(), vec![&Value::Int(5)]);
    assert_eq!(floats(&t, "lambda_min"), vec![0.5]);
}

#[test]
fn empty_k_list_gives_empty_table() {
    let t = json_table(&["lune", "--k", ""]);
    assert!(t.rows.is_empty());
    assert_eq!(t.columns[0], "kf2");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    assert_eq!(bosonize(&["lune", "--config", &bad]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.json", r#"{"kf2": [1], "colour": "red"}"#);
    let out = bosonize(&["lune", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert_eq!(bosonize(&["lune", "--k", "1,0"]).status.code(), Some(2));
    assert_eq!(bosonize(&["lune", "--k", "0,0,0"]).status.code(), Some(2));
    assert_eq!(bosonize(&["lune", "--kf2", "0"]).status.code(), Some(2));
    assert_eq!(bosonize(&["verify", "--only", "nothing"]).status.code(), Some(2));
    assert_eq!(bosonize(&["verify", "--fault", "nothing"]).status.code(), Some(2));
    assert_eq!(bosonize(&["lune", "--bogus"]).status.code(), Some(2));
    assert_eq!(bosonize(&["corr", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kf2": [9], "k": [[1,1,0]]}"#);
    let t = json_table(&["lune", "--config", &cfg, "--kf2", "4"]);
    assert_eq!(t.column("kf2").unwrap(), vec![&Value::Int(4)]);
    assert_eq!(t.column("ky").unwrap(), vec![&Value::Int(1)]);
}

#[test]
fn corr_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "z.json", r#"{"kf2": [1, 4], "system": {"potential": {"type": "zero"}}}"#);
    let t = json_table(&["corr", "--config", &cfg]);
    assert_eq!(t.rows.len(), 2);
    for col in ["e_bos", "e_ex", "error_scale"] {
        assert!(floats(&t, col).iter().all(|x| *x == 0.0), "{col}");
    }
    // kinetic part only: Σ|p|² over the ball, shells 1·6 + 2·12 + 3·8 + 4·6 at kF2 = 4
    assert_eq!(floats(&t, "e_fermi"), vec![6.0, 78.0]);
}

#[test]
fn corr_rows_and_signs() {
    let t = json_table(&["corr", "--kf2", "9,4,16", "--cutoff", "6"]);
    assert_eq!(t.column("kf2").unwrap(), vec![&Value::Int(4), &Value::Int(9), &Value::Int(16)]);
    assert!(floats(&t, "e_bos").iter().all(|x| *x < 0.0));
    assert!(floats(&t, "e_ex").iter().all(|x| *x > 0.0));
}

#[test]
fn inadmissible_exit_3_names_k() {
    let dir = tempfile::tempdir().unwrap();
    let entries: Vec<String> = ["1,0,0", "-1,0,0", "0,1,0", "0,-1,0", "0,0,1", "0,0,-1"]
        .iter()
        .map(|k| format!("[[{k}], -1000.0]"))
        .collect();
    let cfg = write(
        dir.path(),
        "a.json",
        &format!(r#"{{"kf2": [4], "system": {{"potential": {{"type": "table", "entries": [{}]}}}}}}"#, entries.join(",")),
    );
    let out = bosonize(&["corr", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k = ("), "{err}");
}

#[test]
fn plasmon_table() {
    let t = json_table(&["plasmon", "--kf2", "100,400", "--k", "1,0,0;0,1,1"]);
    assert_eq!(t.rows.len(), 4);
    assert!(t.column("deviation_nonincreasing").unwrap().iter().all(|v| **v == Value::Bool(true)));
    let eps = floats(&t, "epsilon");
    let lo = floats(&t, "epsilon_lower");
    assert!(eps.iter().zip(&lo).all(|(e, l)| e >= l));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"system": {"mean_field": true}}"#);
    assert_eq!(bosonize(&["plasmon", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn riemann_beta_grid() {
    let t = json_table(&["riemann", "--kf2", "100", "--k", "1,0,0;30,0,0"]);
    assert_eq!(t.rows.len(), 6);
    let regimes: Vec<&Value> = t.column("regime").unwrap();
    assert_eq!(regimes[0], &Value::Str("below_2kF".into()));
    assert_eq!(regimes[5], &Value::Str("above_2kF".into()));
    assert_eq!(t.column("continuum").unwrap()[5], &Value::Null);
}

#[test]
fn echo_reproduces_table() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let out = bosonize(&["corr", "--kf2", "4,9", "--cutoff", "5", "--out", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&first).unwrap();
    let echo = text.lines().find_map(|l| l.strip_prefix("# config=")).unwrap();
    let cfg = write(dir.path(), "echo.json", echo);
    let again = bosonize(&["corr", "--config", &cfg]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn json_by_extension_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    assert_eq!(bosonize(&["lune", "--kf2", "4,9", "--k", "1,0,0;1,1,1", "--out", p.to_str().unwrap()]).status.code(), Some(0));
    let text = std::fs::read_to_string(&p).unwrap();
    let t = ResultTable::from_json(&text).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert_eq!(t.to_json(), text);
}

#[test]
fn verify_only_fock() {
    let t = json_table(&["verify", "--only", "fock"]);
    assert!(!t.rows.is_empty());
    assert!(t.column("suite").unwrap().iter().all(|v| **v == Value::Str("fock".into())));
    assert!(t.column("status").unwrap().iter().all(|v| **v == Value::Str("pass".into())));
}

#[test]
fn injected_fault_fails_diagonalization() {
    let out = bosonize(&["verify", "--only", "onebody", "--fault", "flip_kernel_sign"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("FAIL onebody.diagonalization_residual"), "{err}");
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("onebody,diagonalization_residual,fail,")));
}
