//! Batch command implementations.
//!
//! Every command resolves its experiment config, fans independent seeds out
//! over the rayon pool, then writes all artifacts from the calling thread
//! in a fixed order. Outputs are deterministic for a given config and seed
//! list regardless of thread count; the only run-dependent datum is the
//! timestamp, which lives in the manifest and nowhere else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use sphere_heat::diagnostics::{Surrogate, SweepAxis};
use sphere_heat::{
    convergence_sweep, isotropy_test, second_moment_ode, simulate_path, Config, Degree,
    SweepResult,
};

use crate::config::ExperimentConfig;
use crate::files;

/// Artifact format for simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PathFormat {
    /// Long-form `tau,ell,m,value` rows.
    Csv,
    /// Little-endian binary blocks; see the writer docs.
    Bin,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    l: usize,
    lambda: usize,
    seeds: &'a [u64],
    artifacts: &'a [String],
    generated_unix_seconds: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &Config,
    seeds: &[u64],
    artifacts: &[String],
) -> anyhow::Result<()> {
    let generated_unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            command,
            l: cfg.l(),
            lambda: cfg.lambda(),
            seeds,
            artifacts,
            generated_unix_seconds,
        },
    )
}

fn ensure_out(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// Integrates one path per seed and writes a snapshot file each, plus the
/// manifest listing them.
pub fn run_simulate(
    experiment: &ExperimentConfig,
    out: &Path,
    format: PathFormat,
) -> anyhow::Result<Vec<PathBuf>> {
    let (cfg, seeds) = experiment.build()?;
    ensure_out(out)?;
    let paths: Vec<sphere_heat::Path> = seeds
        .par_iter()
        .map(|&seed| simulate_path(&cfg, seed))
        .collect::<sphere_heat::Result<_>>()?;

    let mut artifacts = Vec::new();
    let mut written = Vec::new();
    for (seed, sample) in seeds.iter().zip(&paths) {
        let name = match format {
            PathFormat::Csv => format!("path_seed{seed}.csv"),
            PathFormat::Bin => format!("path_seed{seed}.bin"),
        };
        let file = out.join(&name);
        match format {
            PathFormat::Csv => files::save_path_csv(&file, sample)?,
            PathFormat::Bin => files::save_path_binary(&file, sample)?,
        }
        artifacts.push(name);
        written.push(file);
    }
    write_manifest(out, "simulate", &cfg, &seeds, &artifacts)?;
    println!(
        "simulate: {} paths over {} breakpoints each, written to {}",
        seeds.len(),
        cfg.grid().num_steps(),
        out.display()
    );
    Ok(written)
}

/// Sweep axes by their flag names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AxisArg {
    /// Solution band limit (values are L).
    L,
    /// Time refinement (values multiply every step count).
    N,
    /// Noise truncation (values are Λ).
    Lambda,
}

impl AxisArg {
    fn to_axis(self) -> SweepAxis {
        match self {
            AxisArg::L => SweepAxis::SpatialDegree,
            AxisArg::N => SweepAxis::TimeRefinement,
            AxisArg::Lambda => SweepAxis::NoiseTruncation,
        }
    }

    fn label(self) -> &'static str {
        match self {
            AxisArg::L => "L",
            AxisArg::N => "n",
            AxisArg::Lambda => "Lambda",
        }
    }
}

#[derive(Serialize)]
struct SlopeSummary<'a> {
    axis: &'a str,
    values: &'a [usize],
    estimates: Vec<f64>,
    stderrs: Vec<f64>,
    slope: f64,
}

fn save_sweep_csv(
    path: &Path,
    axis: AxisArg,
    values: &[usize],
    base: &Config,
    result: &SweepResult<f64>,
) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "axis,value,l,lambda,samples,estimate,stderr,bound_degree,bound_time,bound_tail"
    )?;
    for (&value, report) in values.iter().zip(result.reports()) {
        let (l, lambda) = match axis {
            AxisArg::L => (value, base.lambda()),
            AxisArg::N => (base.l(), base.lambda()),
            AxisArg::Lambda => (base.l(), value),
        };
        writeln!(
            w,
            "{},{value},{l},{lambda},{},{},{},{},{},{}",
            axis.label(),
            report.samples(),
            report.estimate(),
            report.stderr(),
            report.bound_degree(),
            report.bound_time(),
            report.bound_tail()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a convergence sweep and writes the per-value report CSV plus a JSON
/// summary carrying the fitted slope.
pub fn run_convergence(
    experiment: &ExperimentConfig,
    axis: AxisArg,
    values: &[usize],
    surrogate: &Surrogate,
    out: &Path,
) -> anyhow::Result<()> {
    let (cfg, seeds) = experiment.build()?;
    anyhow::ensure!(
        seeds.len() >= 2,
        "error estimation needs at least two seeds, got {}",
        seeds.len()
    );
    let result = convergence_sweep(&cfg, axis.to_axis(), values, surrogate, &seeds)?;
    ensure_out(out)?;
    save_sweep_csv(&out.join("report.csv"), axis, values, &cfg, &result)?;
    write_json(
        &out.join("slopes.json"),
        &SlopeSummary {
            axis: axis.label(),
            values,
            estimates: result.reports().iter().map(|r| r.estimate()).collect(),
            stderrs: result.reports().iter().map(|r| r.stderr()).collect(),
            slope: result.slope(),
        },
    )?;
    write_manifest(
        out,
        "convergence",
        &cfg,
        &seeds,
        &["report.csv".into(), "slopes.json".into()],
    )?;
    println!(
        "convergence along {}: fitted slope {:+.3} over {} values",
        axis.label(),
        result.slope(),
        values.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct IsotropySummary {
    verdict: String,
    z: f64,
    samples: usize,
    degree_max: usize,
    breakpoint: usize,
}

/// Estimates coefficient covariances at a breakpoint and writes the verdict
/// plus the moment table.
pub fn run_isotropy(
    experiment: &ExperimentConfig,
    z: f64,
    breakpoint: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let (cfg, seeds) = experiment.build()?;
    anyhow::ensure!(
        seeds.len() >= 2,
        "moment estimation needs at least two seeds, got {}",
        seeds.len()
    );
    anyhow::ensure!(z.is_finite() && z > 0.0, "z must be a positive number, got {z}");
    let breakpoint = breakpoint.unwrap_or_else(|| cfg.grid().num_steps());
    anyhow::ensure!(
        breakpoint <= cfg.grid().num_steps(),
        "breakpoint {breakpoint} is outside the grid's {} steps",
        cfg.grid().num_steps()
    );
    let (estimate, verdict) = isotropy_test(&cfg, breakpoint, &seeds, z)?;
    ensure_out(out)?;

    let csv_path = out.join("covariance.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "ell1,m1,ell2,m2,moment,stderr")?;
    for d1 in Degree::modes_up_to(estimate.degree_max()) {
        for d2 in Degree::modes_up_to(estimate.degree_max()) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                d1.ell(),
                d1.m(),
                d2.ell(),
                d2.m(),
                estimate.moment(d1, d2),
                estimate.stderr_of(d1, d2)
            )?;
        }
    }
    w.flush()?;

    write_json(
        &out.join("isotropy.json"),
        &IsotropySummary {
            verdict: verdict.to_string(),
            z,
            samples: estimate.samples(),
            degree_max: estimate.degree_max(),
            breakpoint,
        },
    )?;
    write_manifest(
        out,
        "isotropy",
        &cfg,
        &seeds,
        &["covariance.csv".into(), "isotropy.json".into()],
    )?;
    println!("{verdict}");
    Ok(())
}

/// Integrates the second-moment evolution and writes the product-basis
/// table at the final time.
pub fn run_second_moment(
    experiment: &ExperimentConfig,
    t_final: f64,
    truncation: Option<usize>,
    out: &Path,
) -> anyhow::Result<()> {
    let (cfg, _) = experiment.build()?;
    anyhow::ensure!(
        t_final.is_finite() && t_final >= 0.0,
        "final time must be nonnegative, got {t_final}"
    );
    let truncation = truncation.unwrap_or(cfg.l());
    let table = second_moment_ode(&cfg, t_final, truncation)?;
    ensure_out(out)?;

    let csv_path = out.join("second_moment.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "ell1,m1,ell2,m2,value")?;
    for d1 in Degree::modes_up_to(table.degree_max()) {
        for d2 in Degree::modes_up_to(table.degree_max()) {
            writeln!(
                w,
                "{},{},{},{},{}",
                d1.ell(),
                d1.m(),
                d2.ell(),
                d2.m(),
                table.entry(d1, d2)
            )?;
        }
    }
    w.flush()?;
    write_manifest(out, "second-moment", &cfg, &[], &["second_moment.csv".into()])?;
    println!(
        "second moments up to degree {} at t = {t_final}, written to {}",
        table.degree_max(),
        csv_path.display()
    );
    Ok(())
}

/// Loads a spectrum, writes it back in canonical form, and verifies the
/// loop is the identity.
pub fn run_spectrum_roundtrip(input: &Path, output: &Path) -> anyhow::Result<()> {
    let spectrum = files::load_spectrum(input)?;
    files::save_spectrum(output, &spectrum)?;
    let back = files::load_spectrum(output)?;
    if back.values() != spectrum.values() {
        anyhow::bail!(
            "round trip through {} changed the spectrum",
            output.display()
        );
    }
    println!(
        "spectrum round trip: {} degrees, identity holds",
        spectrum.values().len()
    );
    Ok(())
}
