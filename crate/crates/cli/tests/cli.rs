use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DETERMINISTIC: &str = r#"{
  "model": { "kind": "indicator-deterministic", "T": 1.0, "N": 40, "L": 2.0, "tstar": 0.5 },
  "y0": 0.0,
  "n_paths": 200,
  "seed": 7
}"#;

const EXPONENTIAL: &str = r#"{
  "model": { "kind": "indicator-exponential", "T": 1.0, "N": 50, "L": 1.0, "lambda": 1.0 },
  "y0": 0.0,
  "n_paths": 4000,
  "seed": 7
}"#;

fn swing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swing")).args(args).output().expect("run swing")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(dir: &TempDir, command: &str, config: &str, out: &str, extra: &[&str]) -> Output {
    let config = write_config(dir.path(), &format!("{out}.json"), config);
    let out = dir.path().join(out);
    let mut args = vec![command, "--config", &config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    swing(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn solve_writes_surface_and_metadata() {
    let dir = TempDir::new().unwrap();
    let output = run(&dir, "solve", DETERMINISTIC, "a", &[]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let csv = fs::read_to_string(dir.path().join("a/surface.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("i,t,node,state,j,y,J,D,W"));
    assert_eq!(csv.lines().count(), 1 + 41 * 42);
    let meta = read_json(&dir.path().join("a/solve.json"));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["grid"]["N"], 40);
    assert!((meta["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(meta["surface"]["rows"], 41 * 42);
}

#[test]
fn invalid_configs_exit_1_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let negative = EXPONENTIAL.replace("\"lambda\": 1.0", "\"lambda\": -1.0");
    let output = run(&dir, "solve", &negative, "neg", &[]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("lambda"), "{}", stderr(&output));

    let zero_steps = EXPONENTIAL.replace("\"N\": 50", "\"N\": 0");
    assert_eq!(run(&dir, "solve", &zero_steps, "zero", &[]).status.code(), Some(1));

    let unknown = EXPONENTIAL.replace("\"seed\": 7", "\"seed\": 7, \"tolerance\": 1");
    let output = run(&dir, "verify", &unknown, "unknown", &[]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("tolerance"), "{}", stderr(&output));

    let missing = swing(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn verify_passes_on_fresh_and_exported_surfaces() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&dir, "solve", DETERMINISTIC, "s", &[]).status.code(), Some(0));
    let surface = dir.path().join("s/surface.csv");
    let output = run(&dir, "verify", DETERMINISTIC, "v", &["--surface", surface.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stdout));
    let report = read_json(&dir.path().join("v/verify.json"));
    assert_eq!(report["pass"], true);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["name"] == "closed_form_indicator"));

    let gbm = r#"{"model": {"kind": "gbm-call", "T": 0.5, "N": 30, "L": 2.0, "S0": 100.0, "K": 100.0, "sigma": 0.3, "r": 0.0}}"#;
    assert_eq!(run(&dir, "verify", gbm, "g", &[]).status.code(), Some(0));
}

#[test]
fn corrupted_surface_fails_verification_with_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&dir, "solve", DETERMINISTIC, "s", &[]).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("s/surface.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let target = lines
        .iter()
        .position(|l| l.starts_with("10,") && l.split(',').nth(4) == Some("5"))
        .unwrap();
    let mut fields: Vec<String> = lines[target].split(',').map(String::from).collect();
    let bumped: f64 = fields[6].parse::<f64>().unwrap() + 0.1;
    fields[6] = format!("{bumped:.16e}");
    lines[target] = fields.join(",");
    let corrupted = dir.path().join("corrupted.csv");
    fs::write(&corrupted, lines.join("\n") + "\n").unwrap();

    let output = run(&dir, "verify", DETERMINISTIC, "c", &["--surface", corrupted.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let report = read_json(&dir.path().join("c/verify.json"));
    assert_eq!(report["pass"], false);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.iter().any(|n| n.starts_with("concave") || n.starts_with("bspde")), "{failed:?}");
}

#[test]
fn price_reports_bounds_and_rejects_single_path() {
    let dir = TempDir::new().unwrap();
    let output = run(&dir, "price", EXPONENTIAL, "p", &[]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let summary = String::from_utf8_lossy(&output.stdout);
    assert!(summary.contains("primal") && summary.contains("dual") && summary.contains("gap"));
    let report = read_json(&dir.path().join("p/price.json"));
    assert!(report["gap"].as_f64().unwrap().abs() <= 0.02);
    assert_eq!(report["dual"]["map"], "optimal");
    assert_eq!(report["model"]["kind"], "indicator-exponential");
    assert_eq!(report["n_paths"], 4000);

    let exhausted = EXPONENTIAL.replace("\"y0\": 0.0", "\"y0\": 1.0");
    assert_eq!(run(&dir, "price", &exhausted, "z", &[]).status.code(), Some(0));
    let zero = read_json(&dir.path().join("z/price.json"));
    assert_eq!(zero["primal"]["mean"], 0.0);
    assert_eq!(zero["dual"]["mean"], 0.0);

    assert_eq!(run(&dir, "price", EXPONENTIAL, "one", &["--paths", "1"]).status.code(), Some(1));
}

#[test]
fn outputs_are_byte_identical_and_carry_the_config_hash() {
    let dir = TempDir::new().unwrap();
    for out in ["r1", "r2"] {
        for command in ["solve", "verify", "price"] {
            let output = run(&dir, command, EXPONENTIAL, out, &["--seed", "11", "--paths", "500"]);
            assert_eq!(output.status.code(), Some(0), "{command}: {}", stderr(&output));
        }
    }
    for file in ["surface.csv", "solve.json", "verify.json", "price.json"] {
        let a = fs::read(dir.path().join("r1").join(file)).unwrap();
        let b = fs::read(dir.path().join("r2").join(file)).unwrap();
        assert!(a == b, "{file} differs between identical runs");
    }
    let hash = read_json(&dir.path().join("r1/solve.json"))["config_hash"].clone();
    assert_eq!(read_json(&dir.path().join("r1/verify.json"))["config_hash"], hash);
    let price = read_json(&dir.path().join("r1/price.json"));
    assert_eq!(price["config_hash"], hash);
    assert_eq!(price["seed"], 11);

    let other = run(&dir, "price", EXPONENTIAL, "r3", &["--seed", "12", "--paths", "500"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(read_json(&dir.path().join("r3/price.json"))["config_hash"], hash);
}
