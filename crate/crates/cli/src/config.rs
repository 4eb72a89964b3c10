//! Experiment configuration: a JSON document naming the initial data, the
//! driving spectrum and noise, the truncation parameters, and the seeds.
//!
//! Parsing and serialization are pure string transforms; relative paths
//! inside a config resolve against the config file's directory only when
//! loaded through [`load_experiment`], so a config travels with its data
//! files. Serialization of a parsed config is idempotent.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use sphere_heat::{
    build_time_grid, Coeffs, Config, GFunction, HarmonicCoeffs, NoiseSpec, Spectrum,
    StepAllocation,
};

use crate::files::{load_coeffs, load_multipliers, load_spectrum};
use crate::gridded::project_gridded_field;

/// Where the initial condition comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSource {
    /// Coefficient triangle from an `ell,m,value` file.
    Coefficients { path: PathBuf },
    /// Gridded scalar field, projected onto the basis up to the run's L.
    GriddedField { path: PathBuf },
    /// The constant function with this value everywhere on the sphere.
    Constant { value: f64 },
}

/// Where the angular power spectrum comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSource {
    /// `ell,A` file.
    File { path: PathBuf },
    /// `A_0 = amplitude`, `A_ell = amplitude / ell^exponent` up to
    /// `degree_max`, zero beyond.
    PowerLaw {
        amplitude: f64,
        exponent: f64,
        degree_max: usize,
    },
}

/// The pointwise function applied by the noise operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GSpec {
    Identity,
    Constant { value: f64 },
    Affine { a: f64, b: f64 },
}

impl GSpec {
    pub fn to_g(self) -> GFunction<f64> {
        match self {
            GSpec::Identity => GFunction::Identity,
            GSpec::Constant { value } => GFunction::Constant(value),
            GSpec::Affine { a, b } => GFunction::Affine { a, b },
        }
    }
}

impl FromStr for GSpec {
    type Err = anyhow::Error;

    /// `identity`, `constant:<b>`, or `affine:<a>,<b>`.
    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s == "identity" {
            return Ok(GSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("constant:") {
            let value = rest.parse().context("constant level")?;
            return Ok(GSpec::Constant { value });
        }
        if let Some(rest) = s.strip_prefix("affine:") {
            let (a, b) = rest
                .split_once(',')
                .context("affine form is affine:<a>,<b>")?;
            return Ok(GSpec::Affine {
                a: a.parse().context("affine slope")?,
                b: b.parse().context("affine offset")?,
            });
        }
        bail!("unknown pointwise function {s:?}; use identity, constant:<b>, or affine:<a>,<b>")
    }
}

/// Where the noise multipliers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSource {
    /// `ell,m,eta` file; entries missing from the file are zero, degrees
    /// above the file's maximum up to Λ are zero as well.
    File { path: PathBuf },
    /// The same multiplier for every mode.
    Uniform { value: f64 },
}

/// Noise operator description: pointwise function plus multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSource {
    pub g: GSpec,
    pub eta: EtaSource,
}

/// Seeds as an explicit list or a count expanding to `0..count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSource {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSource {
    pub fn resolve(&self) -> anyhow::Result<Vec<u64>> {
        let seeds = match self {
            SeedSource::Count(n) => (0..*n).collect(),
            SeedSource::List(list) => list.clone(),
        };
        if seeds.is_empty() {
            bail!("the experiment needs at least one seed");
        }
        Ok(seeds)
    }
}

mod alloc_text {
    //! StepAllocation serialized in the CLI's textual form so the JSON
    //! field and the `--alloc` flag share one syntax.

    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &StepAllocation, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<StepAllocation, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

/// Full experiment description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Solution band limit L.
    pub l: usize,
    /// Noise truncation Λ.
    pub lambda: usize,
    pub initial: InitialSource,
    pub spectrum: SpectrumSource,
    pub noise: NoiseSource,
    /// Step-count rule, in the `--alloc` flag syntax.
    #[serde(with = "alloc_text")]
    pub allocation: StepAllocation,
    pub seeds: SeedSource,
    /// Output directory; the `--out` flag overrides it.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<ExperimentConfig> {
        serde_json::from_str(text).context("parsing experiment config")
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Rebases the config's relative file references onto `dir`.
    pub fn resolve_against(&mut self, dir: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&p);
            }
        };
        match &mut self.initial {
            InitialSource::Coefficients { path } | InitialSource::GriddedField { path } => {
                rebase(path)
            }
            InitialSource::Constant { .. } => {}
        }
        if let SpectrumSource::File { path } = &mut self.spectrum {
            rebase(path);
        }
        if let EtaSource::File { path } = &mut self.noise.eta {
            rebase(path);
        }
    }

    fn build_spectrum(&self) -> anyhow::Result<Spectrum> {
        match &self.spectrum {
            SpectrumSource::File { path } => Ok(load_spectrum(path)?),
            SpectrumSource::PowerLaw {
                amplitude,
                exponent,
                degree_max,
            } => {
                let mut a = vec![*amplitude];
                for ell in 1..=*degree_max {
                    a.push(amplitude / (ell as f64).powf(*exponent));
                }
                Spectrum::new(a).context("power-law spectrum")
            }
        }
    }

    fn build_noise(&self) -> anyhow::Result<NoiseSpec<f64>> {
        let g = self.noise.g.to_g();
        match &self.noise.eta {
            EtaSource::Uniform { value } => {
                NoiseSpec::uniform(g, self.lambda, *value).context("uniform multipliers")
            }
            EtaSource::File { path } => {
                let (file_lambda, mut eta) = load_multipliers(path)?;
                let lambda = file_lambda.max(self.lambda);
                eta.resize((lambda + 1) * (lambda + 1), 0.0);
                NoiseSpec::new(g, lambda, eta)
                    .with_context(|| format!("multipliers from {}", path.display()))
            }
        }
    }

    fn build_initial(&self) -> anyhow::Result<Coeffs> {
        match &self.initial {
            InitialSource::Coefficients { path } => Ok(load_coeffs(path)?),
            InitialSource::GriddedField { path } => Ok(project_gridded_field(path, self.l)?),
            InitialSource::Constant { value } => {
                let mut c = HarmonicCoeffs::zeros(0);
                c.values_mut()[0] = value * (4.0 * std::f64::consts::PI).sqrt();
                Ok(c)
            }
        }
    }

    /// Builds the runnable scheme configuration and the seed list.
    pub fn build(&self) -> anyhow::Result<(Config, Vec<u64>)> {
        let spectrum = self.build_spectrum()?;
        let noise = self.build_noise()?;
        let initial = self.build_initial()?;
        let counts = self.allocation.step_counts(spectrum.values(), self.lambda);
        let grid = build_time_grid(&counts).context("time grid")?;
        let cfg = Config::new(self.l, self.lambda, grid, noise, spectrum, initial)
            .context("assembling the scheme configuration")?;
        let seeds = self.seeds.resolve()?;
        Ok((cfg, seeds))
    }
}

/// Reads a config file and rebases its relative data paths onto the file's
/// directory.
pub fn load_experiment(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .with_context(|| format!("config {}", path.display()))?;
    if let Some(dir) = path.parent() {
        cfg.resolve_against(dir);
    }
    Ok(cfg)
}
