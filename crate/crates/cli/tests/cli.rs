//! End-to-end tests of the `monoreg` binary: exit codes, file outputs, and
//! the determinism and round-trip guarantees of the reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use monoreg::grid::{Cuboid, GridFunction, GridSpec};
use monoreg::io;
use monoreg::order::Signature;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monoreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("monoreg-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a CSV + sidecar pair and returns the CSV path; the sidecar sits
/// next to it with the `json` extension the CLI derives by default.
fn write_data(
    dir: &Path,
    name: &str,
    grid: &GridSpec,
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
    sig: &str,
) -> PathBuf {
    let f = GridFunction::new(grid.clone(), values).unwrap();
    let w = weights.map(|v| GridFunction::new(grid.clone(), v).unwrap());
    let csv = dir.join(format!("{name}.csv"));
    io::write_grid_csv(&csv, &f, w.as_ref()).unwrap();
    io::write_sidecar(
        &dir.join(format!("{name}.json")),
        grid,
        Some(&Signature::parse(sig).unwrap()),
    )
    .unwrap();
    csv
}

#[test]
fn fit_pools_the_descent_and_certifies() {
    let dir = tempdir("fit-pava");
    let grid = GridSpec::equidistant(Cuboid::unit(1), &[3]).unwrap();
    let csv = write_data(&dir, "data", &grid, vec![3.0, 1.0, 2.0], None, "+1");
    let fitted_path = dir.join("fitted.csv");

    let out = run(&[
        "fit",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        fitted_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let fitted = io::read_grid_data(&fitted_path, &dir.join("data.json")).unwrap();
    assert_eq!(fitted.f.values(), &[2.0, 2.0, 2.0]);

    let report = json_file(&dir.join("fitted.cert.json"));
    assert_eq!(report["command"], "fit");
    assert_eq!(report["signature"], "+1");
    assert_eq!(report["points"], 3);
    assert_eq!(report["certificate"]["pass"], true);
    assert_eq!(report["certificate"]["monotone"], true);
}

#[test]
fn fit_returns_monotone_input_byte_identical() {
    let dir = tempdir("fit-monotone");
    let grid = GridSpec::equidistant(Cuboid::unit(1), &[4]).unwrap();
    let csv = write_data(
        &dir,
        "data",
        &grid,
        vec![0.1, 1.0 / 3.0, 0.75, 2.5e3],
        None,
        "+1",
    );
    let fitted_path = dir.join("fitted.csv");

    let out = run(&[
        "fit",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        fitted_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&fitted_path).unwrap());
}

#[test]
fn fit_round_trip_is_a_fixed_point() {
    let dir = tempdir("fit-roundtrip");
    let grid = GridSpec::equidistant(Cuboid::unit(2), &[3, 3]).unwrap();
    let values = vec![0.9, 0.4, 1.7, 0.2, 1.3, 0.6, 2.4, 0.8, 1.1];
    let weights = vec![1.0, 2.0, 0.5, 1.5, 1.0, 3.0, 0.75, 1.25, 2.0];
    let csv = write_data(&dir, "data", &grid, values, Some(weights), "+1,-1");
    let meta = dir.join("data.json");
    let first = dir.join("first.csv");
    let second = dir.join("second.csv");

    let out = run(&[
        "fit",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    // The fitted CSV keeps the weight column, so refitting it against the
    // original sidecar poses the identical problem again.
    let out = run(&[
        "fit",
        "--in",
        first.to_str().unwrap(),
        "--meta",
        meta.to_str().unwrap(),
        "--sig",
        "+1,-1",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn fit_rejects_incomplete_csv_with_line_diagnostic() {
    let dir = tempdir("fit-missing");
    let grid = GridSpec::equidistant(Cuboid::unit(1), &[3]).unwrap();
    write_data(&dir, "data", &grid, vec![1.0, 2.0, 3.0], None, "+1");
    // Drop the middle row.
    let csv = dir.join("data.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let pruned: Vec<&str> = text.lines().filter(|l| !l.starts_with("1,")).collect();
    fs::write(&csv, pruned.join("\n")).unwrap();

    let out = run(&[
        "fit",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        dir.join("fitted.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("csv line"), "stderr: {err}");
    assert!(err.contains("no row"), "stderr: {err}");
}

#[test]
fn project_matches_fit_on_equidistant_grids_only() {
    let dir = tempdir("project");
    let grid = GridSpec::equidistant(Cuboid::unit(1), &[3]).unwrap();
    let csv = write_data(&dir, "data", &grid, vec![3.0, 1.0, 2.0], None, "+1");
    let projected = dir.join("projected.csv");
    let out = run(&[
        "project",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        projected.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let data = io::read_grid_data(&projected, &dir.join("data.json")).unwrap();
    assert_eq!(data.f.values(), &[2.0, 2.0, 2.0]);
    assert_eq!(json_file(&dir.join("projected.cert.json"))["command"], "project");

    // Uneven cells carry unequal volumes; project refuses them.
    let uneven = GridSpec::from_breakpoints(Cuboid::unit(1), vec![vec![0.0, 0.1, 0.4, 1.0]])
        .unwrap();
    let csv = write_data(&dir, "uneven", &uneven, vec![3.0, 1.0, 2.0], None, "+1");
    let out = run(&[
        "project",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        dir.join("nope.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("equidistant"), "stderr: {}", stderr(&out));
}

#[test]
fn converge_paraboloid_approaches_the_analytic_projection() {
    let dir = tempdir("converge-parab");
    let report_path = dir.join("report.json");
    let args = [
        "converge",
        "--builtin",
        "paraboloid1d",
        "--sig",
        "+1",
        "--norm",
        "sup",
        "--levels",
        "2..8",
        "--target",
        "1e-9",
        "--out",
        report_path.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let doc = json_file(&report_path);
    assert_eq!(doc["command"], "converge");
    assert_eq!(doc["source"], "paraboloid1d");
    let levels = doc["report"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 7);

    // The monotone hull of (x - 0.5)^2 on [0,1] under +1: constant 1/16
    // until x = 3/4, the parabola beyond.
    let values = doc["report"]["fitted"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 256);
    let mut worst: f64 = 0.0;
    for (k, v) in values.iter().enumerate() {
        let x = (k as f64 + 0.5) / 256.0;
        let truth = if x <= 0.75 {
            1.0 / 16.0
        } else {
            (x - 0.5) * (x - 0.5)
        };
        worst = worst.max((v.as_f64().unwrap() - truth).abs());
    }
    assert!(worst <= 2e-3, "sup distance to analytic projection {worst}");

    // Plot CSV: one row per level, first successive_diff empty.
    let plot = fs::read_to_string(dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines[0], "level,len_G,disc_err,bound,successive_diff");
    assert_eq!(lines.len(), 8);
    assert!(lines[1].ends_with(','));
    assert!(!lines[2].ends_with(','));

    // Same flags, fresh output paths: byte-identical artifacts.
    let report2 = dir.join("again.json");
    let mut args2 = args;
    args2[12] = report2.to_str().unwrap();
    let out = run(&args2);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let a = fs::read_to_string(&report_path).unwrap();
    let b = fs::read_to_string(&report2).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(dir.join("report.csv")).unwrap(),
        fs::read(dir.join("again.csv")).unwrap()
    );
}

#[test]
fn converge_monotone_plane_fits_exactly_and_flags_unreachable_target() {
    let dir = tempdir("converge-plane");
    let report_path = dir.join("plane.json");
    let out = run(&[
        "converge",
        "--builtin",
        "monotone-plane",
        "--sig",
        "+1,+1",
        "--levels",
        "2..5",
        "--target",
        "0",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let doc = json_file(&report_path);
    // Monotone data is its own fit, so the discrete objective is exactly 0
    // at every level.
    for rec in doc["report"]["levels"].as_array().unwrap() {
        assert_eq!(rec["solve_objective"].as_f64().unwrap(), 0.0);
    }
    // A target of 0 cannot be certified; the run goes to max_level and says so.
    assert_eq!(doc["target_unreached"], true);
    assert_eq!(doc["report"]["target_reached"], false);
    assert_eq!(doc["report"]["levels"].as_array().unwrap().len(), 4);
}

#[test]
fn converge_lifts_fine_grid_csv_data() {
    let dir = tempdir("converge-lift");
    // Dyadic level-3 data: once the refinement grid matches it, midpoint
    // sampling reproduces the lift exactly and the certified bound is 0.
    let grid = GridSpec::dyadic(Cuboid::unit(1), 3).unwrap();
    let csv = write_data(
        &dir,
        "fine",
        &grid,
        vec![0.9, 0.4, 1.7, 0.2, 1.3, 0.6, 2.4, 0.8],
        Some(vec![1.0, 0.5, 2.0, 1.5, 0.75, 1.0, 1.25, 2.0]),
        "+1",
    );
    let report_path = dir.join("lift.json");
    // No --sig: the sidecar's signature applies.
    let out = run(&[
        "converge",
        "--in",
        csv.to_str().unwrap(),
        "--levels",
        "3..5",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let doc = json_file(&report_path);
    assert_eq!(doc["target_unreached"], false);
    let levels = doc["report"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 1, "level 3 already certifies a zero bound");
    assert_eq!(levels[0]["discretization_error"].as_f64().unwrap(), 0.0);
    assert_eq!(levels[0]["bound"].as_f64().unwrap(), 0.0);
}

#[test]
fn converge_rejects_unknown_builtins() {
    let dir = tempdir("converge-unknown");
    let out = run(&[
        "converge",
        "--builtin",
        "frobnicate",
        "--sig",
        "+1",
        "--out",
        dir.join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("unknown builtin"), "stderr: {err}");
    assert!(err.contains("paraboloid1d"), "stderr: {err}");
}

#[test]
fn point_probes_the_paraboloid_fit() {
    let out = run(&[
        "point",
        "--builtin",
        "paraboloid1d",
        "--sig",
        "+1",
        "--at",
        "0.9",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["command"], "point");
    assert_eq!(doc["x0"].as_array().unwrap().len(), 1);
    // At x = 0.9 the fit equals the data: (0.9 - 0.5)^2 = 0.16.
    let value = doc["value"].as_f64().unwrap();
    assert!((value - 0.16).abs() <= 1e-3, "value {value}");
    let steps = doc["steps"].as_array().unwrap();
    assert!(steps.len() >= 2);
    assert_eq!(
        steps.last().unwrap()["value"].as_f64().unwrap(),
        value
    );

    // Identical invocation, identical bytes.
    let again = run(&[
        "point",
        "--builtin",
        "paraboloid1d",
        "--sig",
        "+1",
        "--at",
        "0.9",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn verify_passes_on_positive_data_and_rejects_domain_violations() {
    let dir = tempdir("verify");
    let grid = GridSpec::equidistant(Cuboid::unit(2), &[3, 2]).unwrap();
    let csv = write_data(
        &dir,
        "data",
        &grid,
        vec![1.4, 0.8, 2.1, 0.6, 1.9, 1.2],
        Some(vec![1.0, 0.5, 2.0, 1.5, 0.75, 1.0]),
        "+1,0",
    );
    let report_path = dir.join("verify.json");
    let out = run(&[
        "verify",
        "--in",
        csv.to_str().unwrap(),
        "--bregman",
        "entropy",
        "--trials",
        "60",
        "--seed",
        "11",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc = json_file(&report_path);
    assert_eq!(doc["report"]["pass"], true);
    assert_eq!(doc["report"]["spec"], "entropy");
    assert_eq!(doc["report"]["trials"], 60);
    assert_eq!(doc["seed"], 11);

    // Entropy needs positive values; negative data is an input error.
    let csv = write_data(
        &dir,
        "negative",
        &grid,
        vec![1.4, -0.8, 2.1, 0.6, 1.9, 1.2],
        None,
        "+1,0",
    );
    let out = run(&["verify", "--in", csv.to_str().unwrap(), "--bregman", "entropy"]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("domain of convexity"),
        "stderr: {}",
        stderr(&out)
    );

    // Unknown spec names are usage errors too.
    let out = run(&["verify", "--in", csv.to_str().unwrap(), "--bregman", "cube"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn run_executes_a_config_file_deterministically() {
    let dir = tempdir("run-config");
    let grid = GridSpec::equidistant(Cuboid::unit(1), &[6]).unwrap();
    let csv = write_data(
        &dir,
        "data",
        &grid,
        vec![0.9, 0.4, 1.7, 0.2, 1.3, 0.6],
        None,
        "+1",
    );

    let config = |out: &Path| {
        serde_json::json!({
            "command": "verify",
            "input": csv.to_str().unwrap(),
            "sig": "+1",
            "bregman": "square",
            "trials": 40,
            "seed": 9,
            "out": out.to_str().unwrap(),
        })
    };
    let out1 = dir.join("v1.json");
    let out2 = dir.join("v2.json");
    let job1 = dir.join("job1.json");
    let job2 = dir.join("job2.json");
    fs::write(&job1, config(&out1).to_string()).unwrap();
    fs::write(&job2, config(&out2).to_string()).unwrap();

    let out = run(&["run", "--config", job1.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let out = run(&["run", "--config", job2.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let a = json_file(&out1);
    assert_eq!(a["report"]["pass"], true);
    // Identical seed and inputs: identical bytes.
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());

    // Unknown keys in a config are input errors, not silent typos.
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"command":"verify","inptu":"x.csv"}"#).unwrap();
    let out = run(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = run(&["bogus"]);
    assert_eq!(code(&out), 1);
    assert!(!stderr(&out).is_empty());

    let out = run(&["fit"]);
    assert_eq!(code(&out), 1);

    let out = run(&["point", "--builtin", "paraboloid1d", "--sig", "+1"]);
    assert_eq!(code(&out), 1, "missing --at is a usage error");

    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("converge"));
}
