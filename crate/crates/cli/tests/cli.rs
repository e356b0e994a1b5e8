use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn signorini(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signorini"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "example = \"constant\"\nstrategy = \"uniform\"\ncoarse_n = 2\nmax_cycles = 3\n",
    );
    let out = dir.path().join("out");
    let result = signorini(&[
        "run",
        "--config",
        &config,
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "cycle,dofs,h_max,estimate,err_pos,err_neg,err_total,effectivity,N_h,condition_ah"
    );
    assert_eq!(lines.len(), 4);
    for c in 0..3 {
        assert!(out.join(format!("cycle_{c:03}.vtk")).exists());
        assert!(out.join(format!("cycle_{c:03}_boundary.csv")).exists());
    }
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "example = \"example1\"\nmax_cycles = 2\nbeta = 0.5\n",
    );
    let out = dir.path().join("out");
    let result = signorini(&[
        "run",
        "--config",
        &config,
        "--output",
        out.to_str().unwrap(),
        "--strategy",
        "uniform",
        "--p",
        "6",
    ]);
    assert!(result.status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let dofs: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(dofs, vec!["81", "289"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "beta = 1.5\n");
    assert_eq!(signorini(&["run", "--config", &bad]).status.code(), Some(2));

    let unknown = write_config(dir.path(), "refine_everything = true\n");
    assert_eq!(
        signorini(&["run", "--config", &unknown]).status.code(),
        Some(2)
    );

    let good = write_config(dir.path(), "max_cycles = 1\n");
    assert_eq!(
        signorini(&["run", "--config", &good, "--beta", "0"])
            .status
            .code(),
        Some(2)
    );

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        signorini(&["run", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn stalled_solver_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "example = \"example1\"\nmax_cycles = 2\n[solver]\nmax_outer = 1\n",
    );
    let result = signorini(&["run", "--config", &config]);
    assert_eq!(result.status.code(), Some(3));
}

#[test]
fn interpolant_demo_prints_rates() {
    let result = signorini(&[
        "demo-interpolant",
        "--function",
        "paraboloid",
        "--levels",
        "3",
    ]);
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    let rates: Vec<f64> = stdout
        .lines()
        .find(|l| l.starts_with("rate"))
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|r| r.parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 3);
    for r in rates {
        assert!((r - 2.0).abs() < 0.15, "{stdout}");
    }
}

#[test]
fn unknown_demo_function_is_a_usage_error() {
    let result = signorini(&["demo-interpolant", "--function", "cubic", "--levels", "3"]);
    assert_eq!(result.status.code(), Some(2));
}
