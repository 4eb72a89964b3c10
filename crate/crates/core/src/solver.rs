//! Time integration of the truncated stochastic heat equation: the
//! drift-implicit Euler scheme on a multi-rate grid, refined reference runs
//! coupled through shared Brownian draws, and the deterministic heat flow.
//!
//! One step from τ_{k-1} to τ_k updates every coefficient ℓ <= L as
//!
//! ```text
//! X(τ_k) = Γ_ℓ(τ_k)/Γ_ℓ(τ_{k-1}) · ( X(τ_{k-1})
//!        + Σ_{ℓ' active} Σ_{|m'| <= ℓ'} √A_ℓ' ⟨B(X(s_{k,ℓ'})) Y_{ℓ'm'}, Y_{ℓm}⟩
//!          · Γ_ℓ(τ_{k-1})/Γ_ℓ(s_{k,ℓ'}) · (w_{ℓ'm'}(τ_k) − w_{ℓ'm'}(s_{k,ℓ'})) )
//! ```
//!
//! where a noise degree ℓ' is active when τ_k lies on its own grid, and its
//! lookback s_{k,ℓ'} is then the own-grid node one step earlier, so the
//! driving increment is that mode's own-grid increment. Modes sharing a
//! lookback are assembled in one transform pass; accumulation order is fixed
//! (groups by ascending lookback, modes by ascending ℓ' then m'), making
//! paths bit-reproducible for a given seed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::harmonics::{build_grid, mu, Degree, HarmonicCoeffs, SphereGrid};
use crate::increments::{generate_increments, IncrementTable};
use crate::noise::{
    assemble_noise_increment, assemble_noise_increment_per_mode, NoiseGroup, NoiseSpec,
};
use crate::real::Real;
use crate::spectrum::AngularPowerSpectrum;
use crate::timegrid::{build_time_grid, GammaEvaluator, Time, TimeGrid};

/// Which implementation the noise assembly uses; the grouped fast path is
/// the default and the per-mode path is the self-check oracle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AssemblyPath {
    #[default]
    Grouped,
    PerMode,
}

/// Everything that defines one discretized equation: truncation degrees,
/// the time grid, the noise operator, the driving spectrum, and the
/// deterministic initial coefficients (truncated to degree L on entry).
#[derive(Clone, Debug)]
pub struct SchemeConfig<R> {
    l: usize,
    lambda: usize,
    grid: TimeGrid,
    noise: NoiseSpec<R>,
    spectrum: AngularPowerSpectrum<R>,
    initial: HarmonicCoeffs<R>,
    assembly: AssemblyPath,
}

impl<R: Real> SchemeConfig<R> {
    pub fn new(
        l: usize,
        lambda: usize,
        grid: TimeGrid,
        noise: NoiseSpec<R>,
        spectrum: AngularPowerSpectrum<R>,
        initial: HarmonicCoeffs<R>,
    ) -> Result<Self> {
        if lambda > spectrum.degree_max() && !spectrum.values().is_empty() {
            return Err(Error::Invalid(format!(
                "noise truncation {lambda} exceeds the spectrum range {}",
                spectrum.degree_max()
            )));
        }
        if spectrum.values().is_empty() && lambda > 0 {
            return Err(Error::Invalid(
                "noise truncation exceeds the empty spectrum".into(),
            ));
        }
        if noise.lambda() < lambda {
            return Err(Error::Invalid(format!(
                "multiplier triangle stops at {} but modes reach {lambda}",
                noise.lambda()
            )));
        }
        if grid.lambda() != lambda {
            return Err(Error::Invalid(format!(
                "time grid allocates degrees 0..={} but the noise truncation is {lambda}",
                grid.lambda()
            )));
        }
        Ok(Self {
            l,
            lambda,
            grid,
            noise,
            spectrum,
            initial: initial.resized(l),
            assembly: AssemblyPath::default(),
        })
    }

    /// Switches the noise-assembly implementation.
    pub fn with_assembly(mut self, assembly: AssemblyPath) -> Self {
        self.assembly = assembly;
        self
    }

    pub fn assembly(&self) -> AssemblyPath {
        self.assembly
    }

    /// Spatial truncation degree L.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Noise truncation degree Λ.
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn noise(&self) -> &NoiseSpec<R> {
        &self.noise
    }

    pub fn spectrum(&self) -> &AngularPowerSpectrum<R> {
        &self.spectrum
    }

    /// Initial coefficients, already truncated to degree L.
    pub fn initial(&self) -> &HarmonicCoeffs<R> {
        &self.initial
    }

    /// Quadrature grid wide enough for the scheme's triple products.
    pub fn working_grid(&self) -> SphereGrid<R> {
        build_grid(2 * self.l + self.lambda)
    }

    /// The same equation on a time grid with every step count multiplied by
    /// `refine`.
    pub fn refined(&self, refine: u64) -> Result<Self> {
        if refine == 0 {
            return Err(Error::Invalid("refinement factor must be positive".into()));
        }
        let n: Vec<u64> = self
            .grid
            .step_counts()
            .iter()
            .map(|&c| {
                c.checked_mul(refine).ok_or_else(|| {
                    Error::Invalid(format!("step count {c} overflows when refined by {refine}"))
                })
            })
            .collect::<Result<_>>()?;
        let mut refined = self.clone();
        refined.grid = build_time_grid(&n)?;
        Ok(refined)
    }
}

/// States at every merged breakpoint of one simulated path.
#[derive(Clone, Debug)]
pub struct PathSample<R> {
    seed: u64,
    tau: Vec<Time>,
    states: Vec<HarmonicCoeffs<R>>,
}

impl<R: Real> PathSample<R> {
    /// Seed of the driving increments.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Breakpoints, exact.
    pub fn tau(&self) -> &[Time] {
        &self.tau
    }

    /// Breakpoint as a float.
    pub fn tau_at(&self, k: usize) -> R {
        crate::timegrid::ratio_to_real(self.tau[k])
    }

    /// Number of steps K.
    pub fn num_steps(&self) -> usize {
        self.tau.len() - 1
    }

    /// All breakpoint states, index k = 0..=K.
    pub fn states(&self) -> &[HarmonicCoeffs<R>] {
        &self.states
    }

    /// State at breakpoint k.
    pub fn state(&self, k: usize) -> &HarmonicCoeffs<R> {
        &self.states[k]
    }

    /// State at τ_K = 1.
    pub fn final_state(&self) -> &HarmonicCoeffs<R> {
        self.states.last().expect("paths store τ_0")
    }
}

/// Reusable per-configuration machinery: the Γ table for all degrees up to L
/// and the quadrature grid. Building it once amortizes the setup over a whole
/// path.
pub struct Stepper<'a, R> {
    cfg: &'a SchemeConfig<R>,
    gamma: GammaEvaluator<R>,
    sphere: SphereGrid<R>,
}

impl<'a, R: Real> Stepper<'a, R> {
    pub fn new(cfg: &'a SchemeConfig<R>) -> Self {
        Stepper {
            cfg,
            gamma: GammaEvaluator::new(&cfg.grid, cfg.l),
            sphere: cfg.working_grid(),
        }
    }

    /// Γ table of the underlying grid.
    pub fn gamma(&self) -> &GammaEvaluator<R> {
        &self.gamma
    }

    /// Advances the path by one step; `states` must hold the breakpoint
    /// states 0..k-1 produced so far.
    pub fn step(
        &self,
        states: &[HarmonicCoeffs<R>],
        k: usize,
        incr: &IncrementTable<R>,
    ) -> Result<HarmonicCoeffs<R>> {
        let cfg = self.cfg;
        let grid = &cfg.grid;
        assert!(
            k >= 1 && k <= grid.num_steps(),
            "step index {k} outside 1..={}",
            grid.num_steps()
        );
        if states.len() < k {
            return Err(Error::Invalid(format!(
                "internal: step {k} needs {k} stored states, found {}",
                states.len()
            )));
        }
        // Active modes grouped by lookback index; BTreeMap iterates groups
        // in ascending s and members(k) is ascending in ℓ'.
        let mut mode_groups: BTreeMap<usize, Vec<(Degree, R)>> = BTreeMap::new();
        for &ell_prime in grid.members(k) {
            let node = grid
                .node_index(k, ell_prime)
                .expect("members' own grids contain the breakpoint");
            let amplitude = cfg.spectrum.amplitude(ell_prime);
            let lookback = grid.lookback_index(k, ell_prime);
            if lookback >= states.len() {
                return Err(Error::Invalid(format!(
                    "internal: lookback state {lookback} missing at step {k}"
                )));
            }
            let entry = mode_groups.entry(lookback).or_default();
            for m in -(ell_prime as isize)..=(ell_prime as isize) {
                let d = Degree::new(ell_prime, m);
                entry.push((d, amplitude * incr.own_increment_ending_at(d, node)));
            }
        }
        let ratio_tables: Vec<Vec<R>> = mode_groups
            .keys()
            .map(|&lb| {
                (0..=cfg.l)
                    .map(|ell| self.gamma.ratio_between(ell, lb, k - 1))
                    .collect()
            })
            .collect();
        let groups: Vec<NoiseGroup<R>> = mode_groups
            .iter()
            .zip(&ratio_tables)
            .map(|((&lb, modes), ratios)| NoiseGroup {
                state: &states[lb],
                modes,
                target_ratios: ratios,
            })
            .collect();
        let noise_sum = match cfg.assembly {
            AssemblyPath::Grouped => {
                assemble_noise_increment(&cfg.noise, &groups, cfg.l, &self.sphere)?
            }
            AssemblyPath::PerMode => {
                assemble_noise_increment_per_mode(&cfg.noise, &groups, cfg.l, &self.sphere)?
            }
        };
        let prev = &states[k - 1];
        if prev.degree_max() != cfg.l {
            return Err(Error::Invalid(format!(
                "internal: stored state has degree {} instead of {}",
                prev.degree_max(),
                cfg.l
            )));
        }
        let mut next = HarmonicCoeffs::zeros(cfg.l);
        for (d, value) in prev.iter() {
            let step_ratio = self.gamma.ratio_between(d.ell(), k - 1, k);
            next[d] = step_ratio * (value + noise_sum.get(d));
        }
        Ok(next)
    }
}

/// One scheme step as a standalone call; builds the per-configuration
/// machinery on the spot, so loops should use [`Stepper`] directly.
pub fn euler_step<R: Real>(
    states: &[HarmonicCoeffs<R>],
    k: usize,
    incr: &IncrementTable<R>,
    cfg: &SchemeConfig<R>,
) -> Result<HarmonicCoeffs<R>> {
    Stepper::new(cfg).step(states, k, incr)
}

/// Runs the scheme over the whole grid with increments drawn from `seed`.
///
/// Equal seeds give bit-identical paths.
pub fn simulate_path<R: Real>(cfg: &SchemeConfig<R>, seed: u64) -> Result<PathSample<R>> {
    let table = generate_increments(&cfg.spectrum, cfg.lambda, &cfg.grid, seed);
    simulate_path_with(cfg, &table)
}

/// Runs the scheme consuming an existing increment table, which must be
/// drawn on (or aggregated to) exactly this configuration's grid.
pub fn simulate_path_with<R: Real>(
    cfg: &SchemeConfig<R>,
    incr: &IncrementTable<R>,
) -> Result<PathSample<R>> {
    if incr.lambda() < cfg.lambda || !incr.matches(&cfg.grid) {
        return Err(Error::Invalid(
            "increment table was drawn for a different grid".into(),
        ));
    }
    let stepper = Stepper::new(cfg);
    let k_total = cfg.grid.num_steps();
    let mut states = Vec::with_capacity(k_total + 1);
    states.push(cfg.initial.clone());
    for k in 1..=k_total {
        let next = stepper.step(&states, k, incr)?;
        states.push(next);
    }
    Ok(PathSample {
        seed: incr.seed(),
        tau: cfg.grid.tau().to_vec(),
        states,
    })
}

/// The same equation solved on a grid refined by the given factor, from the
/// same seed. Aggregating this run's increment table onto the coarse grid
/// (see [`coupled_pair`]) drives a coarse run with the same Brownian paths,
/// which is how reference solutions for error studies are produced.
pub fn reference_path<R: Real>(
    cfg: &SchemeConfig<R>,
    seed: u64,
    refine: u64,
) -> Result<PathSample<R>> {
    simulate_path(&cfg.refined(refine)?, seed)
}

/// Coarse and refined runs driven by the same Brownian paths: increments
/// are drawn once on the refined grid and re-summed for the coarse one.
/// Returns (coarse, fine).
pub fn coupled_pair<R: Real>(
    cfg: &SchemeConfig<R>,
    seed: u64,
    refine: u64,
) -> Result<(PathSample<R>, PathSample<R>)> {
    let fine_cfg = cfg.refined(refine)?;
    let fine_table = generate_increments(&cfg.spectrum, cfg.lambda, &fine_cfg.grid, seed);
    let coarse_table = fine_table.aggregate_to(&cfg.grid)?;
    let coarse = simulate_path_with(cfg, &coarse_table)?;
    let fine = simulate_path_with(&fine_cfg, &fine_table)?;
    Ok((coarse, fine))
}

/// Heat semigroup applied to coefficients: entry (ℓ,m) is scaled by
/// `exp(−ℓ(ℓ+1)·t)`.
pub fn exact_heat_flow<R: Real>(xi: &HarmonicCoeffs<R>, t: R) -> HarmonicCoeffs<R> {
    assert!(t >= R::zero(), "the heat flow runs forward in time");
    let mut out = HarmonicCoeffs::zeros(xi.degree_max());
    for (d, v) in xi.iter() {
        out[d] = v * (-mu::<R>(d.ell()) * t).exp();
    }
    out
}
