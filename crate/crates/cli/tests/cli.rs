use std::path::PathBuf;
use std::process::{Command, Output};

use mmcomm::exact::{decimal_string, parse_fraction};
use mmcomm::model::{lower_bound, ProblemShape};
use serde_json::Value;

fn mmcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmcomm")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = mmcomm(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&all)).expect("valid json")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mmcomm-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn bound_examples() {
    let v = json(&["bound", "--shape", "9600", "2400", "600", "--procs", "512"]);
    assert_eq!(v["regime"], "3D");
    assert_eq!(v["lower_bound"], "210937.5");
    assert_eq!(v["lower_bound_fraction"], "421875/2");
    assert_eq!(json(&["bound", "--shape", "12", "12", "12", "--procs", "8"])["lower_bound"], "54");
    assert_eq!(json(&["bound", "--shape", "5", "5", "5", "--procs", "1"])["lower_bound"], "0");
}

#[test]
fn bound_with_memory_reports_binding_term() {
    let v = json(&["bound", "--shape", "9600", "2400", "600", "--procs", "4096", "--memory", "8000"]);
    assert_eq!(v["binding"], "MemoryDependent");
    let v = json(&["bound", "--shape", "9600", "2400", "600", "--procs", "36", "--memory", "1e9"]);
    assert_eq!(v["binding"], "MemoryIndependent");
    let out = mmcomm(&["bound", "--shape", "9600", "2400", "600", "--procs", "512", "--memory", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_examples() {
    let v = json(&["grid", "--shape", "9600", "2400", "600", "--procs", "36"]);
    assert_eq!(v["analytic"]["grid"], serde_json::json!({ "p1": 12, "p2": 3, "p3": 1 }));
    assert_eq!(v["agree"], true);

    let v = json(&["grid", "--shape", "9600", "2400", "600", "--procs", "3"]);
    assert_eq!(v["analytic"]["grid"]["p1"], 3);
    assert_eq!(v["exhaustive"]["grid"], serde_json::json!({ "p1": 3, "p2": 1, "p3": 1 }));

    let v = json(&["grid", "--shape", "7", "7", "7", "--procs", "7"]);
    assert_eq!(v["analytic"]["integral"], false);
    assert_eq!(v["analytic"]["fractional_axes"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["exhaustive"]["grid"], serde_json::json!({ "p1": 7, "p2": 1, "p3": 1 }));
}

#[test]
fn grid_flags_follow_input_axes() {
    let v = json(&["grid", "--shape", "600", "2400", "9600", "--procs", "512"]);
    assert_eq!(v["analytic"]["grid"], serde_json::json!({ "p1": 2, "p2": 8, "p3": 32 }));
}

#[test]
fn simulate_examples() {
    let v = json(&["simulate", "--shape", "96", "96", "96", "--procs", "8"]);
    assert_eq!(v["grid"], serde_json::json!({ "p1": 2, "p2": 2, "p3": 2 }));
    assert_eq!(v["critical_path_words"], "3456");
    assert_eq!(v["attains_bound"], true);
    assert_eq!(v["correctness"], true);

    let v = json(&["simulate", "--shape", "96", "24", "6", "--procs", "36"]);
    assert_eq!(v["critical_path_words"], "76");
    assert_eq!(v["lower_bound"], "76");

    let v = json(&["simulate", "--shape", "96", "24", "6", "--procs", "1"]);
    assert_eq!(v["critical_path_words"], "0");
}

#[test]
fn simulate_rejects_bad_grids() {
    assert_eq!(mmcomm(&["simulate", "--shape", "96", "24", "6", "--grid", "5", "1", "1"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["simulate", "--shape", "96", "24", "6", "--grid", "3", "1", "1", "--procs", "4"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["simulate", "--shape", "7", "7", "7", "--procs", "2"]).status.code(), Some(2));
}

#[test]
fn verify_examples() {
    let v = json(&["verify", "--shape", "9600", "2400", "600", "--procs", "36"]);
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"kkt stationarity"));

    let v = json(&["verify", "--tiny", "--shape", "2", "2", "2", "--procs", "2"]);
    let tiny = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "projection minimum").unwrap();
    assert_eq!(tiny["passed"], true);
    assert!(tiny["detail"].as_str().unwrap().starts_with("min projection sum 8"));

    let v = json(&["verify", "--shape", "4", "4", "4", "--procs", "1"]);
    assert_eq!(v["optimum"]["value"], 48.0);
    assert_eq!(v["optimum"]["x"], serde_json::json!([16.0, 16.0, 16.0]));
}

#[test]
fn verify_tiny_guards_lattice_size() {
    let out = mmcomm(&["verify", "--tiny", "--shape", "5", "5", "5", "--procs", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_switches_regime_at_boundaries() {
    let csv = stdout(&["sweep", "--shape", "9600", "2400", "600", "--procs", "1:512", "--format", "csv"]);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("procs,regime,on_boundary"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 512);
    let boundaries: Vec<&str> = rows.iter().filter(|r| r[2] == "true").map(|r| r[0]).collect();
    assert_eq!(boundaries, vec!["4", "64"]);
    assert_eq!((rows[3][1], rows[4][1]), ("1D", "2D"));
    assert_eq!((rows[63][1], rows[64][1]), ("2D", "3D"));
}

#[test]
fn sweep_single_zero_row() {
    let csv = stdout(&["sweep", "--shape", "1", "1", "1", "--procs", "1:1", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[5], "0");
}

#[test]
fn sweep_json_round_trips() {
    let v = json(&["sweep", "--shape", "96", "24", "6", "--procs", "1:80"]);
    let s = ProblemShape::new(96, 24, 6).unwrap();
    assert_eq!(v["boundaries"]["one_two"], "4");
    assert_eq!(v["boundaries"]["two_three"], "64");
    for row in v["rows"].as_array().unwrap() {
        let p = row["procs"].as_u64().unwrap();
        let r = lower_bound(&s, p, None).unwrap();
        assert_eq!(row["lower_bound"].as_str().unwrap(), r.lower_bound.decimal());
        assert_eq!(row["regime"], r.regime.tag.label());
        let owned = parse_fraction(row["owned_fraction"].as_str().unwrap()).unwrap();
        assert_eq!(owned, r.owned);
        assert_eq!(row["owned"].as_str().unwrap(), decimal_string(&owned));
        if let Some(f) = row["lower_bound_fraction"].as_str() {
            assert_eq!(Some(&parse_fraction(f).unwrap()), r.lower_bound.as_exact());
        }
    }
}

#[test]
fn sweep_rejects_empty_range() {
    assert_eq!(mmcomm(&["sweep", "--shape", "4", "4", "4", "--procs", "9:3"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["sweep", "--procs", "1:4"]).status.code(), Some(2));
}

#[test]
fn constants_table_has_header_and_three_rows() {
    let csv = stdout(&["sweep", "--table", "constants", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "regime,leading_term,acs90,itt04,de13,this_work");
    assert_eq!(lines.len(), 4);
    let v = json(&["sweep", "--table", "constants"]);
    assert_eq!(v["rows"][1]["acs90"], Value::Null);
    assert_eq!(v["rows"][2]["de13"], 0.64);
}

#[test]
fn output_is_deterministic() {
    let args = ["simulate", "--shape", "12", "8", "4", "--procs", "8", "--seed", "3", "--format", "json"];
    assert_eq!(stdout(&args), stdout(&args));
}

#[test]
fn out_flag_and_config_file() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    let out = dir.join("bound.csv");
    std::fs::write(&cfg, "shape = [9600, 2400, 600]\nprocs = 512\nformat = \"csv\"\n").unwrap();
    let status = mmcomm(&["--config", cfg.to_str().unwrap(), "bound", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("n1,n2,n3,procs"));
    assert!(text.contains(",210937.5,"));

    // command-line flags take precedence
    let text = stdout(&["bound", "--config", cfg.to_str().unwrap(), "--procs", "8", "--shape", "12", "12", "12"]);
    assert!(text.contains(",54,"));

    std::fs::write(&cfg, "shape = [1, 2]\n").unwrap();
    assert_eq!(mmcomm(&["--config", cfg.to_str().unwrap(), "bound", "--procs", "2"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(mmcomm(&["bound", "--shape", "0", "1", "1", "--procs", "1"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["bound", "--shape", "2", "2", "2"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["bound", "--shape", "2", "2", "2", "--procs", "1:4"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mmcomm(&["bound", "--shape", "2", "2", "2", "--procs", "2", "--format", "xml"]).status.code(), Some(2));
}
