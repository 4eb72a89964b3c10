//! End-to-end runs of the sphere-heat binary.
//!
//! Every test goes through the compiled executable, so argument parsing,
//! config loading, artifact layout, and exit codes are all exercised the
//! way a batch script would see them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphere-heat"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary launches")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", stderr_of(out));
}

/// Small noisy experiment: constant initial data, a three-degree power-law
/// spectrum, affine pointwise noise.
fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("experiment.json");
    std::fs::write(
        &path,
        r#"{
  "l": 2,
  "lambda": 1,
  "initial": { "kind": "constant", "value": 0.5 },
  "spectrum": { "kind": "power_law", "amplitude": 2.0, "exponent": 2.0, "degree_max": 2 },
  "noise": { "g": { "kind": "affine", "a": 0.3, "b": 1.0 }, "eta": { "kind": "uniform", "value": 0.9 } },
  "allocation": "uniform:3",
  "seeds": 2
}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_path_files_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("runs");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    for seed in 0..3 {
        assert!(out_dir.join(format!("path_seed{seed}.csv")).is_file());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(
        manifest["artifacts"],
        serde_json::json!(["path_seed0.csv", "path_seed1.csv", "path_seed2.csv"])
    );
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for (out_dir, threads) in [(&out1, "1"), (&out2, "4")] {
        let out = run(&[
            "--threads",
            threads,
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seeds",
            "4",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_ok(&out);
    }
    for seed in 0..4 {
        let name = format!("path_seed{seed}.csv");
        let a = std::fs::read(out1.join(&name)).unwrap();
        let b = std::fs::read(out2.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between thread counts");
    }
}

#[test]
fn binary_snapshots_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("runs");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "11",
        "--format",
        "bin",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let record = sphere_heat_cli::files::load_path_binary(&out_dir.join("path_seed11.bin")).unwrap();
    assert_eq!(record.degree_max, 2);
    assert_eq!(record.states.first().map(|s| s.0), Some(0.0));
    assert_eq!(record.states.last().map(|s| s.0), Some(1.0));
}

#[test]
fn convergence_writes_report_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "convergence",
        "--config",
        config.to_str().unwrap(),
        "--axis",
        "n",
        "--values",
        "1,2,4",
        "--seeds",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "axis,value,l,lambda,samples,estimate,stderr,bound_degree,bound_time,bound_tail"
    );
    assert!(lines[1].starts_with("n,1,2,1,3,"));

    let slopes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("slopes.json")).unwrap())
            .unwrap();
    assert_eq!(slopes["axis"], "n");
    assert!(slopes["slope"].as_f64().unwrap().is_finite());
    assert_eq!(slopes["estimates"].as_array().unwrap().len(), 3);
}

fn write_isotropy_config(dir: &Path) -> PathBuf {
    let path = dir.join("iso.json");
    std::fs::write(
        &path,
        r#"{
  "l": 1,
  "lambda": 1,
  "initial": { "kind": "constant", "value": 0.5 },
  "spectrum": { "kind": "power_law", "amplitude": 1.0, "exponent": 2.0, "degree_max": 1 },
  "noise": { "g": { "kind": "identity" }, "eta": { "kind": "uniform", "value": 0.9 } },
  "allocation": "uniform:2",
  "seeds": 400
}"#,
    )
    .unwrap();
    path
}

#[test]
fn isotropy_accepts_uniform_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_isotropy_config(dir.path());
    let out_dir = dir.path().join("iso");
    let out = run(&[
        "isotropy",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(stdout_of(&out).contains("ISOTROPIC"), "{}", stdout_of(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("isotropy.json")).unwrap())
            .unwrap();
    assert_eq!(summary["verdict"], "ISOTROPIC");
    assert_eq!(summary["samples"], 400);
    let covariance = std::fs::read_to_string(out_dir.join("covariance.csv")).unwrap();
    assert_eq!(covariance.lines().count(), 1 + 16);
}

#[test]
fn isotropy_flags_a_rigged_multiplier_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_isotropy_config(dir.path());
    let eta = dir.path().join("rigged.csv");
    std::fs::write(&eta, "1,-1,10\n").unwrap();
    let out_dir = dir.path().join("iso");
    let out = run(&[
        "isotropy",
        "--config",
        config.to_str().unwrap(),
        "--eta-file",
        eta.to_str().unwrap(),
        "--seeds",
        "2000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let printed = stdout_of(&out);
    assert!(printed.contains("ANISOTROPIC"), "{printed}");
}

#[test]
fn second_moment_writes_the_product_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("moments");
    let out = run(&[
        "second-moment",
        "--config",
        config.to_str().unwrap(),
        "--t-final",
        "0.05",
        "--truncation",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let table = std::fs::read_to_string(out_dir.join("second_moment.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 16);
    assert_eq!(table.lines().next().unwrap(), "ell1,m1,ell2,m2,value");
}

#[test]
fn spectrum_roundtrip_reports_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    std::fs::write(&input, "2,0.5\n0,4\n1,1.5\n").unwrap();
    let output = dir.path().join("canonical.csv");
    let out = run(&[
        "spectrum-roundtrip",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(stdout_of(&out).contains("identity holds"));
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "0,4\n1,1.5\n2,0.5\n");
}

#[test]
fn bundled_experiment_runs_offline() {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/experiment.json");
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("demo");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "1",
        "--alloc",
        "uniform:2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    // uniform:2 merges to breakpoints {0, 1/2, 1}; L = 10 has 121 modes.
    let rows = std::fs::read_to_string(out_dir.join("path_seed0.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 3 * 121);
}

#[test]
fn thread_env_var_configures_the_pool() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("env");
    let out = bin()
        .env("SPHERE_HEAT_THREADS", "2")
        .args([
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seeds",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_ok(&out);

    let out = bin()
        .env("SPHERE_HEAT_THREADS", "lots")
        .args(["simulate", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("SPHERE_HEAT_THREADS"),
        "{}",
        stderr_of(&out)
    );
}

#[test]
fn refused_preconditions_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());

    // Isotropy demands constant initial data.
    let structured = dir.path().join("structured.json");
    let text = std::fs::read_to_string(&config).unwrap().replace(
        r#"{ "kind": "constant", "value": 0.5 }"#,
        r#"{ "kind": "coefficients", "path": "xi.csv" }"#,
    );
    std::fs::write(&structured, text).unwrap();
    std::fs::write(dir.path().join("xi.csv"), "0,0,0.5\n1,0,0.3\n").unwrap();
    let out = run(&[
        "isotropy",
        "--config",
        structured.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("constant over the sphere"),
        "{}",
        stderr_of(&out)
    );

    // Error estimation needs two seeds.
    let out = run(&[
        "convergence",
        "--config",
        config.to_str().unwrap(),
        "--axis",
        "n",
        "--values",
        "1,2,4",
        "--seed",
        "7",
        "--out",
        dir.path().join("y").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("two seeds"), "{}", stderr_of(&out));

    // Missing config file names the path.
    let out = run(&["simulate", "--config", "absent.json"]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("absent.json"), "{}", stderr_of(&out));

    // Malformed data files carry their line number.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,1.0\nx,2.0\n").unwrap();
    let out = run(&[
        "spectrum-roundtrip",
        "--in",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("line 2"), "{}", stderr_of(&out));
}
