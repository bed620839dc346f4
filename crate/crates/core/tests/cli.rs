//! End-to-end runs of the `qsslab` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn qsslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsslab")).args(args).env_remove("QSSLAB_SEED").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qsslab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(key)).unwrap_or_else(|| panic!("no {key:?} in {text}"))
}

#[test]
fn simulate_reports_valid_fraction() {
    let out = qsslab(&["simulate", "--runs", "1000", "--seed", "9"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let frac: f64 = field(&text, "valid runs: ").split(['(', ')']).nth(1).unwrap().parse().unwrap();
    assert!((0.45..=0.55).contains(&frac), "{frac}");
    assert_eq!(field(&text, "check 2: "), "pass");
}

#[test]
fn secure_without_code_is_an_error() {
    let out = qsslab(&["simulate", "--variant", "secure"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("secure variant requires a code file"));
}

#[test]
fn transcripts_are_byte_identical_per_seed() {
    let paths: Vec<PathBuf> = (0..3).map(|i| scratch(&format!("t{i}.json"))).collect();
    for (path, seed) in paths.iter().zip(["5", "5", "6"]) {
        let out = qsslab(&["simulate", "--variant", "modified2", "--seed", seed, "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let read = |p: &PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn seed_environment_overrides_flag() {
    let args = ["attack", "--strategy", "intercept", "--cheater", "2", "--runs", "20", "--trials", "50"];
    let with_flag = |seed: &str| {
        let mut a = args.to_vec();
        a.extend(["--seed", seed]);
        stdout(&qsslab(&a))
    };
    let mut a = args.to_vec();
    a.extend(["--seed", "1"]);
    let env = Command::new(env!("CARGO_BIN_EXE_qsslab")).args(&a).env("QSSLAB_SEED", "2").output().unwrap();
    assert_eq!(stdout(&env), with_flag("2"));
    assert_ne!(with_flag("1"), with_flag("2"));
}

#[test]
fn attack_csv_has_header_and_row() {
    let args: Vec<&str> =
        "attack --strategy intercept --cheater 2 --runs 20 --trials 50 --format csv".split(' ').collect();
    let out = qsslab(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("variant,participants,runs"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn codes_search_and_evaluate() {
    let path = scratch("code.json");
    let out = qsslab(&["codes", "--n", "16", "--w", "10", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let d: f64 = field(&text, "n = 16, w = 10, k = ").split("d = ").nth(1).unwrap().parse().unwrap();
    assert!(d > 1392.0 / 187.0 && d < 12.0, "{d}");
    assert_eq!(field(&text, "d > n': "), "true");
    // The written code drives a secure simulation.
    let sim = qsslab(&["simulate", "--variant", "secure", "--code", path.to_str().unwrap()]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert_eq!(field(&stdout(&sim), "check 1: "), "pass");

    let eval = stdout(&qsslab(&["codes", "--n", "100", "--w", "70", "--d", "50"]));
    assert_eq!(field(&eval, "n' = "), "315/8 (39.375)");
    assert_eq!(field(&eval, "p1 = "), "111/400 (0.2775)");

    let none = qsslab(&["codes", "--n", "8", "--w", "8"]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn honest_sweep_always_passes() {
    let out = qsslab(&["sweep", "--param", "N", "--values", "3,4,6", "--runs", "20", "--trials", "40"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let pass = headers.iter().position(|h| h == "pass_probability").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row[pass].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn sweep_rejects_unsorted_values() {
    let out = qsslab(&["sweep", "--values", "8,4", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(1));
}
