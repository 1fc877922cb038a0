use std::io::Write as _;
use std::process::Command;

use greensign::cli::{run, GammaReport, EXIT_HYPOTHESIS, EXIT_RESONANT, EXIT_USAGE};
use greensign::cone::HypothesisReport;
use greensign::solver::{Positivity, SolutionProfile};
use greensign::spectral::{EigenResult, SignClass, SignVerdict};

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("greensign").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Parses `json` as `T` and checks that serializing it again gives the same bytes.
fn round_trip<T: serde::de::DeserializeOwned + serde::Serialize>(json: &str) -> T {
    let value: T = serde_json::from_str(json).unwrap();
    let again = serde_json::to_string_pretty(&value).unwrap() + "\n";
    assert_eq!(again, json);
    value
}

fn csv_rows(text: &str) -> (String, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn positive_example_profile_as_csv() {
    let (code, out, err) = call(&[
        "solve",
        "--bc",
        "dirichlet",
        "--rho",
        "sqrt(60)",
        "--T",
        "1",
        "--rhs",
        "t*(1-t)",
    ]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "t,u");
    assert_eq!(rows.len(), 2001);
    assert!(rows[1..2000].iter().all(|r| r[1] > 0.0));
}

#[test]
fn reports_round_trip_byte_for_byte() {
    let (_, out, _) = call(&[
        "gamma",
        "--bc",
        "dirichlet",
        "--rho",
        "sqrt(60)",
        "--t-grid",
        "101",
    ]);
    let report: GammaReport = round_trip(&out);
    assert!(!report.quadrature.cross_check.unwrap().mismatch);

    let (_, out, _) = call(&["gamma", "--rho", "0.5"]);
    let report: GammaReport = round_trip(&out);
    assert!(report.quadrature.value.is_infinite());
    assert_eq!(
        report.classification.unwrap().verdict,
        SignVerdict::NonNegative
    );

    let (_, out, _) = call(&["classify", "--rho", "4"]);
    let class: SignClass = round_trip(&out);
    assert_eq!(class.verdict, SignVerdict::ChangesSign);

    let (_, out, _) = call(&[
        "check",
        "--bc",
        "dirichlet",
        "--rho",
        "sqrt(60)",
        "--f",
        "t*(1-t)",
    ]);
    let report: HypothesisReport = round_trip(&out);
    assert!(report.passed);

    let (_, out, _) = call(&[
        "solve",
        "--bc",
        "periodic",
        "--rho",
        "1.3",
        "--f",
        "1 + x^2/(1+x^2)",
        "--format",
        "json",
        "--grid",
        "201",
    ]);
    let profile: SolutionProfile = round_trip(&out);
    assert!(profile.converged);
    assert_eq!(profile.positivity, Positivity::Positive);

    let (_, out, _) = call(&["eigen", "--rho", "2", "--format", "json"]);
    let eigen: Vec<EigenResult> = round_trip(&out);
    assert_eq!(eigen.len(), 6);
}

#[test]
fn strict_check_fails_with_status_four() {
    let args = [
        "check",
        "--bc",
        "dirichlet",
        "--rho",
        "sqrt(60)",
        "--f",
        "t",
    ];
    let (code, out, _) = call(&args);
    assert_eq!(code, 0);
    let report: HypothesisReport = serde_json::from_str(&out).unwrap();
    assert!(!report.passed);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(call(&strict).0, EXIT_HYPOTHESIS);
}

#[test]
fn errors_are_structured_lines() {
    let (code, out, err) = call(&["green", "--bc", "dirichlet", "--rho", "pi"]);
    assert_eq!(code, EXIT_RESONANT);
    assert!(out.is_empty());
    let line: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "resonant_potential");

    let (code, _, err) = call(&["gamma", "--rho", "1", "--potential", "t"]);
    assert_eq!(code, EXIT_USAGE);
    let line: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "usage");

    let (code, _, err) = call(&["check", "--rho", "1", "--f", "sin(t"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("\"parse\""));

    assert_eq!(call(&["figure", "6"]).0, EXIT_USAGE);
    assert_eq!(
        call(&["classify", "--rho", "1", "--bc", "antiperiodic"]).0,
        1
    );
}

#[test]
fn kernel_lattice_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let (code, out, _) = call(&[
        "green",
        "--bc",
        "periodic",
        "--rho",
        "1.5*pi",
        "--points",
        "11",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let (header, rows) = csv_rows(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(header, "t,s,value");
    assert_eq!(rows.len(), 121);
    // Translation invariance shows up as constant diagonals.
    let g = |i: usize, j: usize| rows[i * 11 + j][2];
    assert!((g(0, 3) - g(5, 8)).abs() < 1e-12);
}

#[test]
fn sampled_potential_from_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "t,a").unwrap();
    for i in 0..=200 {
        let t = i as f64 / 200.0;
        writeln!(
            file,
            "{t},{}",
            1.0 + 0.5 * (2.0 * std::f64::consts::PI * t).sin()
        )
        .unwrap();
    }
    file.flush().unwrap();
    let path = file.path().to_str().unwrap();
    let (code, out, err) = call(&["classify", "--potential-file", path]);
    assert_eq!(code, 0, "{err}");
    let class: SignClass = serde_json::from_str(&out).unwrap();
    assert_eq!(class.verdict, SignVerdict::NonNegative);

    let (code, out, _) = call(&[
        "solve",
        "--potential-file",
        path,
        "--rhs",
        "1 + 0.5*sin(2*pi*t)",
    ]);
    assert_eq!(code, 0);
    let (_, rows) = csv_rows(&out);
    // The file is interpolated linearly, so u = 1 holds to O(h^2).
    assert!(rows.iter().all(|r| (r[1] - 1.0).abs() < 1e-3));
}

#[test]
fn figures_are_deterministic() {
    let args = ["figure", "2", "--points", "15", "--t-grid", "11"];
    let (code, first, _) = call(&args);
    assert_eq!(code, 0);
    assert_eq!(first, call(&args).1);
    assert!(first.starts_with("t,gamma_closed,gamma_quadrature\n"));

    let (_, sweep, _) = call(&["figure", "1", "--points", "20", "--t-grid", "3"]);
    let (header, rows) = csv_rows(&sweep);
    assert_eq!(header, "rho,gamma_closed,gamma_quadrature");
    // rho = 10 pi is resonant and skipped.
    assert_eq!(rows.len(), 19);
    for r in &rows {
        assert!(r[1] > 1.0 && (r[1] - r[2]).abs() <= 1e-6 * r[1], "{r:?}");
    }
}

#[test]
fn grid_size_comes_from_the_environment() {
    let output = Command::new(env!("CARGO_BIN_EXE_greensign"))
        .args([
            "solve",
            "--bc",
            "dirichlet",
            "--rho",
            "sqrt(60)",
            "--rhs",
            "t",
        ])
        .env("GREENSIGN_GRID", "101")
        .output()
        .unwrap();
    assert!(output.status.success());
    let (_, rows) = csv_rows(std::str::from_utf8(&output.stdout).unwrap());
    assert_eq!(rows.len(), 101);

    let output = Command::new(env!("CARGO_BIN_EXE_greensign"))
        .args(["classify", "--rho", "2*pi"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(EXIT_RESONANT));
}
