//! End-to-end tests of the command-line interface: worked-example values,
//! exit codes, output determinism, and the config/env plumbing.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> PathBuf {
    let mut path = PathBuf::from(env!("CARGO_BIN_EXE_itreval"));
    assert!(path.exists(), "binary missing at {path:?}");
    path = path.canonicalize().unwrap();
    path
}

fn write_five_unit(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("exp.csv");
    std::fs::write(&path, "y,t,score\n2,1,5\n3,1,4\n-1,0,3\n1,0,2\n3,1,1\n").unwrap();
    path
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    cmd.env_remove("ITR_EVAL_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(csv: &str, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| {
        panic!("column {name} missing from {header:?}")
    });
    row[idx].to_string()
}

#[test]
fn evaluate_budgeted_effect_on_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    // raw outcomes (no centering): budgeted prescriptive effect at 40% is 0.6
    let out = run(
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--metric",
            "pape",
            "--budget",
            "0.4",
            "--alpha",
            "0.05",
            "--no-center",
        ],
        &[],
    );
    let text = stdout_of(&out);
    let point: f64 = field(&text, "point").parse().unwrap();
    assert!((point - 0.6).abs() < 1e-12, "point {point}");
    assert_eq!(field(&text, "metric"), "pape_budget");
    assert_eq!(field(&text, "n"), "5");
    assert_eq!(field(&text, "n1"), "3");
    assert_eq!(field(&text, "n0"), "2");
    let se: f64 = field(&text, "std_error").parse().unwrap();
    assert!(se >= 0.0);
}

#[test]
fn curve_emits_one_row_per_budget_level() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    let curve = dir.path().join("curve.csv");
    let out = run(
        &[
            "curve",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--output",
            curve.to_str().unwrap(),
        ],
        &[],
    );
    stdout_of(&out);
    let text = std::fs::read_to_string(&curve).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,value,pape,std_error");
    assert_eq!(lines.len(), 1 + 5, "five data rows expected");
}

#[test]
fn missing_rule_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    let out = run(
        &["evaluate", "--input", input.to_str().unwrap(), "--metric", "pape"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rule-col"), "diagnostic should name the flag: {err}");
}

#[test]
fn non_binary_treatment_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "y,t\n1,0\n2,2\n3,1\n4,0\n").unwrap();
    let out = run(
        &["evaluate", "--input", input.to_str().unwrap(), "--rule-col", "t", "--metric", "pav"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_effect_normalization_is_numeric_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    std::fs::write(&input, "y,t,score\n1,1,4\n1,0,3\n1,1,2\n1,0,1\n").unwrap();
    let out = run(
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--metric",
            "aupec-norm",
            "--exact-z",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oversized_enumeration_is_a_size_guard_error() {
    let out = run(&["oracle-check", "--n", "40", "--populations", "1"], &[]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    let args = [
        "evaluate",
        "--input",
        input.to_str().unwrap(),
        "--rule-col",
        "score",
        "--metric",
        "aupec",
        "--seed",
        "99",
        "--json",
    ];
    let a = run(&args, &[]);
    let b = run(&args, &[]);
    assert_eq!(stdout_of(&a), stdout_of(&b));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "budget = 0.4\nseed = 7\n").unwrap();
    let out = run(
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--metric",
            "pape",
            "--no-center",
            "--config",
            config.to_str().unwrap(),
        ],
        &[],
    );
    let text = stdout_of(&out);
    let point: f64 = field(&text, "point").parse().unwrap();
    assert!((point - 0.6).abs() < 1e-12, "config budget applied: {point}");
    assert_eq!(field(&text, "seed"), "7");

    // explicit flag wins over the file
    let out = run(
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--metric",
            "pape",
            "--no-center",
            "--config",
            config.to_str().unwrap(),
            "--budget",
            "0.8",
        ],
        &[],
    );
    let text = stdout_of(&out);
    let point: f64 = field(&text, "point").parse().unwrap();
    assert!((point - (-7.0 / 15.0)).abs() < 1e-12, "flag override: {point}");
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_five_unit(dir.path());
    let out = run(
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--rule-col",
            "score",
            "--metric",
            "pav",
        ],
        &[("ITR_EVAL_SEED", "1234")],
    );
    let text = stdout_of(&out);
    assert_eq!(field(&text, "seed"), "1234");
}

#[test]
fn compare_without_budget_reports_value_difference() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    std::fs::write(
        &input,
        "y,t,f,g\n2,1,1,1\n3,1,0,1\n-1,0,0,1\n1,0,1,1\n3,1,0,1\n",
    )
    .unwrap();
    let out = run(
        &[
            "compare",
            "--input",
            input.to_str().unwrap(),
            "--rule-col-f",
            "f",
            "--rule-col-g",
            "g",
            "--fixed",
            "--no-center",
        ],
        &[],
    );
    let text = stdout_of(&out);
    let point: f64 = field(&text, "point").parse().unwrap();
    assert!((point - (1.0 / 6.0 - 8.0 / 3.0)).abs() < 1e-12, "value difference {point}");
    assert_eq!(field(&text, "metric"), "value_diff");
}

#[test]
fn compare_with_budget_reports_budgeted_difference() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    std::fs::write(
        &input,
        "y,t,f,g\n2,1,5,1\n3,1,4,2\n-1,0,3,3\n1,0,2,4\n3,1,1,5\n",
    )
    .unwrap();
    let out = run(
        &[
            "compare",
            "--input",
            input.to_str().unwrap(),
            "--rule-col-f",
            "f",
            "--rule-col-g",
            "g",
            "--budget",
            "0.4",
            "--no-center",
        ],
        &[],
    );
    let text = stdout_of(&out);
    let point: f64 = field(&text, "point").parse().unwrap();
    assert!((point - 7.0 / 6.0).abs() < 1e-12, "budgeted difference {point}");
}

#[test]
fn crossval_reports_fold_points_and_pooled_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cv.csv");
    let mut text = String::from("y,t,x1,x2\n");
    let mut state = 9u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..40 {
        let x1 = next() * 2.0 - 1.0;
        let x2 = next() * 2.0 - 1.0;
        let t = i % 2;
        let y = x1 + t as f64 * (0.5 + x2) + 0.1 * (next() - 0.5);
        text.push_str(&format!("{y},{t},{x1},{x2}\n"));
    }
    std::fs::write(&input, text).unwrap();
    let out = run(
        &[
            "crossval",
            "--input",
            input.to_str().unwrap(),
            "--learner",
            "linear-t",
            "--x-cols",
            "x1,x2",
            "--metric",
            "pape-budget",
            "--budget",
            "0.3",
            "--k",
            "4",
            "--seed",
            "5",
        ],
        &[],
    );
    let text = stdout_of(&out);
    assert_eq!(field(&text, "metric"), "pape_budget");
    assert_eq!(field(&text, "k_folds"), "4");
    let folds = field(&text, "fold_points");
    assert_eq!(folds.split(';').count(), 4);
    let pooled: f64 = field(&text, "point").parse().unwrap();
    let mean = folds
        .split(';')
        .map(|v| v.parse::<f64>().unwrap())
        .sum::<f64>()
        / 4.0;
    assert!((pooled - mean).abs() < 1e-12);
}

#[test]
fn simulate_writes_one_row_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("report.csv");
    let out = run(
        &[
            "simulate",
            "--n",
            "60",
            "--xi",
            "2",
            "--trials",
            "12",
            "--metrics",
            "pape,pape-budget",
            "--mc-draws",
            "200",
            "--seed",
            "3",
            "--output",
            output.to_str().unwrap(),
        ],
        &[],
    );
    stdout_of(&out);
    let text = std::fs::read_to_string(&output).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("scenario,metric,truth,bias,sd,mean_se,coverage"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("pape"));
    assert!(lines[2].contains("pape_budget"));
}
