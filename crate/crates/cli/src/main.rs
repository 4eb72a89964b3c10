use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sphere_heat_cli::commands::{self, AxisArg, PathFormat};
use sphere_heat_cli::config::{load_experiment, EtaSource, ExperimentConfig, GSpec, SeedSource};
use sphere_heat::diagnostics::Surrogate;
use sphere_heat::StepAllocation;

/// Environment variable supplying the default worker thread count.
const THREADS_VAR: &str = "SPHERE_HEAT_THREADS";

#[derive(Parser)]
#[command(
    name = "sphere-heat",
    about = "Batch driver for stochastic heat simulations on the sphere",
    version
)]
struct Cli {
    /// Worker threads; defaults to SPHERE_HEAT_THREADS, then all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every config-driven subcommand. Each override replaces
/// the corresponding config field before the experiment is built.
#[derive(Args)]
struct Common {
    /// Experiment config JSON
    #[arg(long)]
    config: PathBuf,
    /// Number of seeds, expanding to 0..N
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<u64>,
    /// Explicit seed, repeatable
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory, overriding the config's
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step allocation override, e.g. uniform:16 or sqrtA:100,1.0
    #[arg(long)]
    alloc: Option<StepAllocation>,
    /// Pointwise noise function override: identity, constant:<b>, affine:<a>,<b>
    #[arg(long)]
    g: Option<GSpec>,
}

impl Common {
    fn load(&self) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        let mut experiment = load_experiment(&self.config)?;
        if let Some(count) = self.seeds {
            experiment.seeds = SeedSource::Count(count);
        } else if !self.seed.is_empty() {
            experiment.seeds = SeedSource::List(self.seed.clone());
        }
        if let Some(alloc) = &self.alloc {
            experiment.allocation = alloc.clone();
        }
        if let Some(g) = self.g {
            experiment.noise.g = g;
        }
        let out = self.out.clone().unwrap_or_else(|| experiment.out_dir.clone());
        Ok((experiment, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate sample paths and write one snapshot file per seed
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Snapshot format
        #[arg(long, value_enum, default_value_t = PathFormat::Csv)]
        format: PathFormat,
    },
    /// Estimate strong errors along a resolution axis and fit a slope
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Axis to sweep
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Axis values, ascending
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// Reference time refinement per value
        #[arg(long, default_value_t = 4)]
        refine: u64,
        /// Reference spatial degree; defaults per axis
        #[arg(long)]
        ref_degree: Option<usize>,
    },
    /// Test rotation invariance of the coefficient covariances
    Isotropy {
        #[command(flatten)]
        common: Common,
        /// Multiplier file overriding the config's noise multipliers
        #[arg(long)]
        eta_file: Option<PathBuf>,
        /// Detection threshold in standard errors
        #[arg(long, default_value_t = 4.0)]
        z: f64,
        /// Breakpoint index to test; defaults to the final time
        #[arg(long)]
        breakpoint: Option<usize>,
    },
    /// Integrate the second-moment evolution equation
    SecondMoment {
        #[command(flatten)]
        common: Common,
        /// Final time
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        /// Product-basis degree cutoff; defaults to the config's L
        #[arg(long)]
        truncation: Option<usize>,
    },
    /// Load a spectrum file, write it back canonically, verify identity
    SpectrumRoundtrip {
        /// Spectrum CSV to read
        #[arg(long = "in")]
        input: PathBuf,
        /// Canonical copy to write
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let count = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_VAR) {
            Ok(text) => Some(
                text.parse()
                    .with_context(|| format!("{THREADS_VAR}={text:?} is not a thread count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(count) = count {
        anyhow::ensure!(count > 0, "thread count must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Simulate { common, format } => {
            let (experiment, out) = common.load()?;
            commands::run_simulate(&experiment, &out, format)?;
        }
        Command::Convergence {
            common,
            axis,
            values,
            refine,
            ref_degree,
        } => {
            let (experiment, out) = common.load()?;
            let surrogate = Surrogate {
                refine,
                degree: ref_degree,
            };
            commands::run_convergence(&experiment, axis, &values, &surrogate, &out)?;
        }
        Command::Isotropy {
            common,
            eta_file,
            z,
            breakpoint,
        } => {
            let (mut experiment, out) = common.load()?;
            if let Some(path) = eta_file {
                experiment.noise.eta = EtaSource::File { path };
            }
            commands::run_isotropy(&experiment, z, breakpoint, &out)?;
        }
        Command::SecondMoment {
            common,
            t_final,
            truncation,
        } => {
            let (experiment, out) = common.load()?;
            commands::run_second_moment(&experiment, t_final, truncation, &out)?;
        }
        Command::SpectrumRoundtrip { input, out } => {
            commands::run_spectrum_roundtrip(&input, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
