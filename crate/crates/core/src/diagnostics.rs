//! Error measurement and model validation: the time-integrated squared
//! error between coupled runs, Monte Carlo estimates of it with the
//! accompanying a-priori bound components, convergence sweeps with log-log
//! slope fits, a statistical isotropy test of the simulated second moments,
//! and a deterministic covariance ODE that cross-checks the simulation for
//! affine pointwise maps.
//!
//! Monte Carlo loops fan out across seeds with rayon; results are reduced
//! in fixed seed order, so estimates are reproducible for a given seed
//! list regardless of thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{analyze, build_grid, mu, synthesize, Degree, HarmonicCoeffs, SphereGrid};
use crate::increments::generate_increments;
use crate::noise::GFunction;
use crate::real::Real;
use crate::solver::{exact_heat_flow, simulate_path, simulate_path_with, PathSample, SchemeConfig};
use crate::timegrid::{build_time_grid, ratio_to_real};

/// One error estimate with its uncertainty and the matching a-priori bound
/// pieces: the spatial truncation term 1/L², the time term
/// Σ_{ℓ'≤Λ}(2ℓ'+1)A_ℓ'/n_ℓ', and the dropped spectral tail
/// Σ_{ℓ'>Λ}(2ℓ'+1)A_ℓ'. The slope field is filled in by sweeps.
#[derive(Clone, Debug)]
pub struct ErrorReport<R> {
    estimate: R,
    stderr: R,
    samples: usize,
    bound_degree: R,
    bound_time: R,
    bound_tail: R,
    slope: Option<R>,
}

impl<R: Real> ErrorReport<R> {
    pub fn new(
        estimate: R,
        stderr: R,
        samples: usize,
        bounds: (R, R, R),
    ) -> Result<Self> {
        if !(estimate.is_finite() && estimate >= R::zero()) {
            return Err(Error::Invalid(format!(
                "error estimate must be finite and non-negative, got {estimate}"
            )));
        }
        if !(stderr.is_finite() && stderr >= R::zero()) {
            return Err(Error::Invalid(format!(
                "standard error must be finite and non-negative, got {stderr}"
            )));
        }
        Ok(ErrorReport {
            estimate,
            stderr,
            samples,
            bound_degree: bounds.0,
            bound_time: bounds.1,
            bound_tail: bounds.2,
            slope: None,
        })
    }

    /// Estimated E ∫₀¹ ‖X_ref − X‖² dt.
    pub fn estimate(&self) -> R {
        self.estimate
    }

    /// Monte Carlo standard error of the estimate.
    pub fn stderr(&self) -> R {
        self.stderr
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Spatial truncation bound component 1/L².
    pub fn bound_degree(&self) -> R {
        self.bound_degree
    }

    /// Time discretization bound component Σ (2ℓ'+1) A_ℓ' / n_ℓ'.
    pub fn bound_time(&self) -> R {
        self.bound_time
    }

    /// Dropped-tail bound component Σ_{ℓ'>Λ} (2ℓ'+1) A_ℓ'.
    pub fn bound_tail(&self) -> R {
        self.bound_tail
    }

    /// Sum of the three bound components.
    pub fn bound_total(&self) -> R {
        self.bound_degree + self.bound_time + self.bound_tail
    }

    /// Log-log slope fitted across the sweep this report belongs to.
    pub fn slope(&self) -> Option<R> {
        self.slope
    }
}

/// The a-priori bound components for one configuration, in the order
/// (spatial, time, tail). The spatial term uses max(L, 1) so degree-zero
/// configurations report a finite (vacuous) component.
pub fn error_bound_components<R: Real>(cfg: &SchemeConfig<R>) -> (R, R, R) {
    let l = cfg.l().max(1);
    let bound_degree = R::one() / R::of_usize(l * l);
    let mut bound_time = R::zero();
    for (ell, &n) in cfg.grid().step_counts().iter().enumerate() {
        bound_time += R::of_usize(2 * ell + 1) * cfg.spectrum().value(ell) / R::of(n as f64);
    }
    let bound_tail = cfg.spectrum().tail_trace(cfg.lambda());
    (bound_degree, bound_time, bound_tail)
}

/// Breakpoint indices of `sub`'s nodes inside `full`, or an error when the
/// paths cover different ranges or `full` lacks one of the nodes.
fn shared_nodes<R: Real>(full: &PathSample<R>, sub: &PathSample<R>) -> Result<Vec<usize>> {
    if full.tau().first() != sub.tau().first() || full.tau().last() != sub.tau().last() {
        return Err(Error::Invalid(
            "paths cover different time ranges".into(),
        ));
    }
    sub.tau()
        .iter()
        .map(|t| {
            full.tau().binary_search(t).map_err(|_| {
                Error::Invalid(format!(
                    "paths do not share breakpoints: {t} is missing from the reference"
                ))
            })
        })
        .collect()
}

/// Squared coefficient-space distance, padding the shorter array with
/// zeros.
fn distance_sq<R: Real>(a: &HarmonicCoeffs<R>, b: &HarmonicCoeffs<R>) -> R {
    let n = a.len().max(b.len());
    let mut sum = R::zero();
    for i in 0..n {
        let d = Degree::from_index(i);
        let diff = a.get(d) - b.get(d);
        sum += diff * diff;
    }
    sum
}

/// Time-integrated squared distance ∫₀¹ ‖ref − approx‖² dt by the
/// left-endpoint rule on the approximation's breakpoints, which must all be
/// breakpoints of the reference. Coefficients beyond either truncation
/// count as zero.
pub fn path_error<R: Real>(reference: &PathSample<R>, approx: &PathSample<R>) -> Result<R> {
    let nodes = shared_nodes(reference, approx)?;
    let mut total = R::zero();
    for k in 0..approx.num_steps() {
        let weight: R = ratio_to_real(approx.tau()[k + 1] - approx.tau()[k]);
        total += distance_sq(reference.state(nodes[k]), approx.state(k)) * weight;
    }
    Ok(total)
}

/// The same functional under the trapezoidal rule, kept as an independent
/// cross-check of the quadrature convention.
pub fn path_error_trapezoid<R: Real>(
    reference: &PathSample<R>,
    approx: &PathSample<R>,
) -> Result<R> {
    let nodes = shared_nodes(reference, approx)?;
    let half = R::of(0.5);
    let mut total = R::zero();
    for k in 0..approx.num_steps() {
        let weight: R = ratio_to_real(approx.tau()[k + 1] - approx.tau()[k]);
        let left = distance_sq(reference.state(nodes[k]), approx.state(k));
        let right = distance_sq(reference.state(nodes[k + 1]), approx.state(k + 1));
        total += half * (left + right) * weight;
    }
    Ok(total)
}

/// How the surrogate truth for error estimation is built from a
/// configuration: the time grid refined by `refine`, and optionally more
/// resolved degrees. Defaults follow the convention of refining time by
/// four; sweeps default the degree to twice the largest swept one.
#[derive(Clone, Copy, Debug)]
pub struct Surrogate {
    pub refine: u64,
    pub degree: Option<usize>,
}

impl Default for Surrogate {
    fn default() -> Self {
        Surrogate {
            refine: 4,
            degree: None,
        }
    }
}

/// The reference configuration a surrogate describes: same equation, time
/// grid refined, initial data zero-padded to the reference degree.
pub fn reference_config<R: Real>(
    cfg: &SchemeConfig<R>,
    surrogate: &Surrogate,
) -> Result<SchemeConfig<R>> {
    let degree = surrogate.degree.unwrap_or(cfg.l());
    if degree < cfg.l() {
        return Err(Error::Invalid(format!(
            "reference degree {degree} resolves less than the approximation's {}",
            cfg.l()
        )));
    }
    let refined = cfg.refined(surrogate.refine)?;
    Ok(SchemeConfig::new(
        degree,
        cfg.lambda(),
        refined.grid().clone(),
        cfg.noise().clone(),
        cfg.spectrum().clone(),
        cfg.initial().resized(degree),
    )?
    .with_assembly(cfg.assembly()))
}

/// Couples one approximation run to one reference run through shared
/// Brownian draws and returns their path error.
fn coupled_error<R: Real>(
    cfg: &SchemeConfig<R>,
    reference: &SchemeConfig<R>,
    seed: u64,
) -> Result<R> {
    let table = generate_increments(
        reference.spectrum(),
        reference.lambda(),
        reference.grid(),
        seed,
    );
    let ref_path = simulate_path_with(reference, &table)?;
    let approx_table = table.truncated_modes(cfg.lambda()).aggregate_to(cfg.grid())?;
    let approx_path = simulate_path_with(cfg, &approx_table)?;
    path_error(&ref_path, &approx_path)
}

/// Monte Carlo estimate of E ∫₀¹ ‖X_ref − X‖² dt over same-seed coupled
/// pairs against the given reference configuration, which must drive the
/// same spectrum, keep at least as many noise modes, and refine the
/// approximation's breakpoints.
pub fn mc_error_estimate<R: Real>(
    cfg: &SchemeConfig<R>,
    reference: &SchemeConfig<R>,
    seeds: &[u64],
) -> Result<ErrorReport<R>> {
    assert!(seeds.len() >= 2, "error estimation needs at least two seeds");
    if reference.lambda() < cfg.lambda() {
        return Err(Error::Invalid(format!(
            "reference keeps {} noise degrees but the approximation drives {}",
            reference.lambda(),
            cfg.lambda()
        )));
    }
    if reference.spectrum().values() != cfg.spectrum().values() {
        return Err(Error::Invalid(
            "reference and approximation drive different spectra".into(),
        ));
    }
    let errors: Vec<R> = seeds
        .par_iter()
        .map(|&seed| coupled_error(cfg, reference, seed))
        .collect::<Result<_>>()?;
    let n = R::of_usize(errors.len());
    let mean = errors.iter().copied().sum::<R>() / n;
    let var = errors
        .iter()
        .map(|&e| (e - mean) * (e - mean))
        .sum::<R>()
        / (n - R::one());
    let stderr = (var / n).max(R::zero()).sqrt();
    ErrorReport::new(mean, stderr, errors.len(), error_bound_components(cfg))
}

/// Which parameter a convergence study varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Spatial truncation degree L; values are degrees.
    SpatialDegree,
    /// Time resolution; values multiply the base grid's step counts.
    TimeRefinement,
    /// Noise truncation; values are kept noise degrees.
    NoiseTruncation,
}

/// Reports of one sweep plus the slope of log(estimate) against
/// log(value), fitted by least squares.
#[derive(Clone, Debug)]
pub struct SweepResult<R> {
    reports: Vec<ErrorReport<R>>,
    slope: R,
}

impl<R: Real> SweepResult<R> {
    pub fn reports(&self) -> &[ErrorReport<R>] {
        &self.reports
    }

    pub fn slope(&self) -> R {
        self.slope
    }
}

fn fitted_log_slope<R: Real>(values: &[usize], estimates: &[R]) -> Result<R> {
    let mut xs = Vec::with_capacity(values.len());
    let mut ys = Vec::with_capacity(values.len());
    for (&v, &e) in values.iter().zip(estimates) {
        if e <= R::zero() {
            return Err(Error::Invalid(
                "cannot fit a slope through a zero error estimate".into(),
            ));
        }
        xs.push(R::of(v as f64).ln());
        ys.push(e.ln());
    }
    let n = R::of_usize(xs.len());
    let x_mean = xs.iter().copied().sum::<R>() / n;
    let y_mean = ys.iter().copied().sum::<R>() / n;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    Ok(sxy / sxx)
}

/// Runs `mc_error_estimate` for every value on the chosen axis and fits the
/// error's log-log slope. Values must be sorted strictly ascending, at
/// least three of them. The base configuration supplies everything not
/// varied; for the spatial axis its initial data should be resolved at the
/// largest swept degree, since derived configurations truncate it.
pub fn convergence_sweep<R: Real>(
    base: &SchemeConfig<R>,
    axis: SweepAxis,
    values: &[usize],
    surrogate: &Surrogate,
    seeds: &[u64],
) -> Result<SweepResult<R>> {
    if values.len() < 3 {
        return Err(Error::Invalid(format!(
            "a slope fit needs at least three sweep values, got {}",
            values.len()
        )));
    }
    assert!(
        values.windows(2).all(|w| w[0] < w[1]),
        "sweep values must be sorted strictly ascending"
    );
    let l_max = match axis {
        SweepAxis::SpatialDegree => *values.last().expect("nonempty"),
        _ => base.l(),
    };
    let ref_degree = surrogate.degree.unwrap_or(2 * l_max.max(1));
    if ref_degree < l_max {
        return Err(Error::Invalid(format!(
            "reference degree {ref_degree} resolves less than the sweep's largest degree {l_max}"
        )));
    }

    let shared_reference = || -> Result<SchemeConfig<R>> {
        Ok(SchemeConfig::new(
            ref_degree,
            base.lambda(),
            base.refined(surrogate.refine)?.grid().clone(),
            base.noise().clone(),
            base.spectrum().clone(),
            base.initial().resized(ref_degree),
        )?
        .with_assembly(base.assembly()))
    };

    let mut reports = Vec::with_capacity(values.len());
    match axis {
        SweepAxis::SpatialDegree => {
            let reference = shared_reference()?;
            for &v in values {
                let cfg = SchemeConfig::new(
                    v,
                    base.lambda(),
                    base.grid().clone(),
                    base.noise().clone(),
                    base.spectrum().clone(),
                    base.initial().clone(),
                )?
                .with_assembly(base.assembly());
                reports.push(mc_error_estimate(&cfg, &reference, seeds)?);
            }
        }
        SweepAxis::TimeRefinement => {
            for &v in values {
                let cfg = base.refined(v as u64)?;
                let reference = reference_config(
                    &cfg,
                    &Surrogate {
                        refine: surrogate.refine,
                        degree: Some(ref_degree),
                    },
                )?;
                reports.push(mc_error_estimate(&cfg, &reference, seeds)?);
            }
        }
        SweepAxis::NoiseTruncation => {
            let reference = shared_reference()?;
            for &v in values {
                if v > base.lambda() {
                    return Err(Error::Invalid(format!(
                        "sweep value {v} exceeds the base noise truncation {}",
                        base.lambda()
                    )));
                }
                let grid = build_time_grid(&base.grid().step_counts()[..=v])?;
                let cfg = SchemeConfig::new(
                    base.l(),
                    v,
                    grid,
                    base.noise().clone(),
                    base.spectrum().clone(),
                    base.initial().clone(),
                )?
                .with_assembly(base.assembly());
                reports.push(mc_error_estimate(&cfg, &reference, seeds)?);
            }
        }
    }

    let estimates: Vec<R> = reports.iter().map(|r| r.estimate()).collect();
    let slope = fitted_log_slope(values, &estimates)?;
    for r in &mut reports {
        r.slope = Some(slope);
    }
    Ok(SweepResult { reports, slope })
}

/// Estimated mode-pair second moments E[X_{ℓm} X_{ℓ'm'}] at one time,
/// with per-entry standard errors. Symmetric with a non-negative diagonal
/// by construction.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate<R> {
    degree_max: usize,
    samples: usize,
    moments: Vec<R>,
    stderr: Vec<R>,
}

impl<R: Real> CovarianceEstimate<R> {
    /// Number of modes per side.
    pub fn dim(&self) -> usize {
        (self.degree_max + 1) * (self.degree_max + 1)
    }

    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Estimated E[X_{d1} X_{d2}].
    pub fn moment(&self, d1: Degree, d2: Degree) -> R {
        self.moments[d1.index() * self.dim() + d2.index()]
    }

    /// Standard error of the matching moment.
    pub fn stderr_of(&self, d1: Degree, d2: Degree) -> R {
        self.stderr[d1.index() * self.dim() + d2.index()]
    }

    /// Row-major moment matrix.
    pub fn moments(&self) -> &[R] {
        &self.moments
    }
}

/// Outcome of the isotropy test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsotropyVerdict {
    Isotropic,
    Anisotropic,
}

impl std::fmt::Display for IsotropyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IsotropyVerdict::Isotropic => write!(f, "ISOTROPIC"),
            IsotropyVerdict::Anisotropic => write!(f, "ANISOTROPIC"),
        }
    }
}

/// Estimates the coefficient second moments at the given breakpoint and
/// judges rotational invariance: isotropic fields have vanishing
/// off-diagonal moments and m-independent diagonals within each degree.
/// Entries are flagged when they sit more than `z` standard errors from
/// that pattern. Requires an initial condition constant over the sphere,
/// which is the hypothesis the verdict is calibrated for.
pub fn isotropy_test<R: Real>(
    cfg: &SchemeConfig<R>,
    breakpoint: usize,
    seeds: &[u64],
    z: R,
) -> Result<(CovarianceEstimate<R>, IsotropyVerdict)> {
    assert!(
        breakpoint <= cfg.grid().num_steps(),
        "breakpoint {breakpoint} outside the grid"
    );
    assert!(seeds.len() >= 2, "moment estimation needs at least two seeds");
    assert!(z > R::zero() && z.is_finite(), "z threshold must be positive");
    for (d, v) in cfg.initial().iter() {
        if d.ell() > 0 && v != R::zero() {
            return Err(Error::Invalid(
                "the isotropy test requires an initial condition constant over the sphere".into(),
            ));
        }
    }
    let states: Vec<Vec<R>> = seeds
        .par_iter()
        .map(|&seed| Ok(simulate_path(cfg, seed)?.state(breakpoint).values().to_vec()))
        .collect::<Result<_>>()?;
    let dim = (cfg.l() + 1) * (cfg.l() + 1);
    let mut sum = vec![R::zero(); dim * dim];
    let mut sum_sq = vec![R::zero(); dim * dim];
    for state in &states {
        for i in 0..dim {
            for j in 0..dim {
                let p = state[i] * state[j];
                sum[i * dim + j] += p;
                sum_sq[i * dim + j] += p * p;
            }
        }
    }
    let n = R::of_usize(states.len());
    let mut moments = vec![R::zero(); dim * dim];
    let mut stderr = vec![R::zero(); dim * dim];
    for i in 0..dim * dim {
        let mean = sum[i] / n;
        let var = ((sum_sq[i] / n - mean * mean) * n / (n - R::one())).max(R::zero());
        moments[i] = mean;
        stderr[i] = (var / n).sqrt();
    }

    let max_diag = (0..dim)
        .map(|i| moments[i * dim + i])
        .fold(R::zero(), R::max);
    let floor = R::of(1e-12) * (R::one() + max_diag);
    let mut isotropic = true;
    for i in 0..dim {
        for j in 0..dim {
            if i != j && moments[i * dim + j].abs() > z * stderr[i * dim + j] + floor {
                isotropic = false;
            }
        }
    }
    for ell in 0..=cfg.l() {
        let idx: Vec<usize> = ((ell * ell)..(ell + 1) * (ell + 1)).collect();
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                let gap = (moments[i * dim + i] - moments[j * dim + j]).abs();
                let se = (stderr[i * dim + i] * stderr[i * dim + i]
                    + stderr[j * dim + j] * stderr[j * dim + j])
                    .sqrt();
                if gap > z * se + floor {
                    isotropic = false;
                }
            }
        }
    }
    let verdict = if isotropic {
        IsotropyVerdict::Isotropic
    } else {
        IsotropyVerdict::Anisotropic
    };
    Ok((
        CovarianceEstimate {
            degree_max: cfg.l(),
            samples: states.len(),
            moments,
            stderr,
        },
        verdict,
    ))
}

/// Deterministic second-moment kernel v(t_final) ≈ E[X(t,x₁)X(t,x₂)] in
/// the product basis, truncated at `degree_max` per factor.
#[derive(Clone, Debug)]
pub struct SecondMomentTable<R> {
    degree_max: usize,
    t_final: R,
    step: R,
    entries: Vec<R>,
}

impl<R: Real> SecondMomentTable<R> {
    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn dim(&self) -> usize {
        (self.degree_max + 1) * (self.degree_max + 1)
    }

    pub fn t_final(&self) -> R {
        self.t_final
    }

    /// Integrator step the table was computed with.
    pub fn step(&self) -> R {
        self.step
    }

    /// Coefficient of Y_{d1}(x₁) Y_{d2}(x₂).
    pub fn entry(&self, d1: Degree, d2: Degree) -> R {
        self.entries[d1.index() * self.dim() + d2.index()]
    }

    /// Row-major coefficient matrix.
    pub fn entries(&self) -> &[R] {
        &self.entries
    }
}

/// Default integrator step of [`second_moment_ode`].
pub const SECOND_MOMENT_STEP: f64 = 1e-3;

/// Synthesizes a product-basis coefficient matrix into point values on
/// `grid` × `grid`, factor by factor.
fn product_synthesize<R: Real>(
    v: &[R],
    degree_max: usize,
    grid: &SphereGrid<R>,
) -> Result<Vec<R>> {
    let dim = (degree_max + 1) * (degree_max + 1);
    let p = grid.len();
    let mut half = vec![R::zero(); dim * p];
    for d1 in 0..dim {
        let row = HarmonicCoeffs::from_values(degree_max, v[d1 * dim..(d1 + 1) * dim].to_vec())?;
        half[d1 * p..(d1 + 1) * p].copy_from_slice(&synthesize(&row, grid)?);
    }
    let mut field = vec![R::zero(); p * p];
    for q in 0..p {
        let col: Vec<R> = (0..dim).map(|d1| half[d1 * p + q]).collect();
        let f = synthesize(&HarmonicCoeffs::from_values(degree_max, col)?, grid)?;
        for (i, &value) in f.iter().enumerate() {
            field[i * p + q] = value;
        }
    }
    Ok(field)
}

/// Projects point values on `grid` × `grid` onto the product basis, factor
/// by factor.
fn product_analyze<R: Real>(
    field: &[R],
    degree_max: usize,
    grid: &SphereGrid<R>,
) -> Result<Vec<R>> {
    let dim = (degree_max + 1) * (degree_max + 1);
    let p = grid.len();
    let mut half = vec![R::zero(); dim * p];
    for q in 0..p {
        let col: Vec<R> = (0..p).map(|i| field[i * p + q]).collect();
        let c = analyze(&col, grid, degree_max)?;
        for d1 in 0..dim {
            half[d1 * p + q] = c.values()[d1];
        }
    }
    let mut out = vec![R::zero(); dim * dim];
    for d1 in 0..dim {
        let c = analyze(&half[d1 * p..(d1 + 1) * p], grid, degree_max)?;
        out[d1 * dim..(d1 + 1) * dim].copy_from_slice(c.values());
    }
    Ok(out)
}

/// Integrates the closed covariance equation dv/dt = ▲v + F(v) with the
/// default step; see [`second_moment_ode_with_step`].
pub fn second_moment_ode<R: Real>(
    cfg: &SchemeConfig<R>,
    t_final: R,
    truncation: usize,
) -> Result<SecondMomentTable<R>> {
    second_moment_ode_with_step(cfg, t_final, truncation, R::of(SECOND_MOMENT_STEP))
}

/// Integrates the covariance ODE for v(t) ≈ E[X(t,x₁)X(t,x₂)] in the
/// product basis truncated at `truncation` per factor.
///
/// The diagonal operator ▲ damps entry (d₁,d₂) at rate μ_{ℓ₁}+μ_{ℓ₂}; the
/// forcing multiplies v pointwise by the noise kernel
/// κ(x₁,x₂) = Σ A_ℓ η_{ℓm}² Y_{ℓm}(x₁)Y_{ℓm}(x₂). The equation closes
/// only for affine pointwise maps g(x) = ax + b, where
/// E[g(X)(x₁)g(X)(x₂)] = a²v + ab(m(x₁)+m(x₂)) + b² with the known mean
/// flow m(t); anything nonlinear is refused. The integrator is backward
/// Euler on the stiff diagonal and explicit on the bounded forcing, with
/// v(0) the product of the configuration's initial coefficients.
pub fn second_moment_ode_with_step<R: Real>(
    cfg: &SchemeConfig<R>,
    t_final: R,
    truncation: usize,
    step: R,
) -> Result<SecondMomentTable<R>> {
    let (a, b) = match *cfg.noise().g() {
        GFunction::Identity => (R::one(), R::zero()),
        GFunction::Constant(c) => (R::zero(), c),
        GFunction::Affine { a, b } => (a, b),
        GFunction::Custom { .. } => {
            return Err(Error::Unsupported(
                "the covariance equation closes only for affine pointwise maps".into(),
            ))
        }
    };
    assert!(
        t_final >= R::zero() && t_final.is_finite(),
        "integration time must be finite and non-negative"
    );
    assert!(step > R::zero() && step.is_finite(), "step must be positive");

    let dim = (truncation + 1) * (truncation + 1);
    let grid = build_grid::<R>(2 * truncation + cfg.lambda());
    let p = grid.len();

    let mut kappa = vec![R::zero(); p * p];
    let mut kappa_zero = true;
    for d in Degree::modes_up_to(cfg.lambda()) {
        let eta = cfg.noise().eta(d);
        let weight = cfg.spectrum().value(d.ell()) * eta * eta;
        if weight == R::zero() {
            continue;
        }
        kappa_zero = false;
        let y = synthesize(&HarmonicCoeffs::unit(cfg.lambda(), d), &grid)?;
        for i in 0..p {
            for j in 0..p {
                kappa[i * p + j] += weight * y[i] * y[j];
            }
        }
    }

    let xi = cfg.initial().resized(truncation);
    let mut v = vec![R::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            v[i * dim + j] = xi.values()[i] * xi.values()[j];
        }
    }

    let cross = a != R::zero() && b != R::zero();
    let mut elapsed = R::zero();
    while elapsed < t_final {
        let h = step.min(t_final - elapsed);
        if !kappa_zero {
            let field = product_synthesize(&v, truncation, &grid)?;
            let mean_pts = if cross {
                Some(synthesize(&exact_heat_flow(cfg.initial(), elapsed), &grid)?)
            } else {
                None
            };
            let mut force = vec![R::zero(); p * p];
            for i in 0..p {
                for j in 0..p {
                    let mut value = a * a * field[i * p + j] + b * b;
                    if let Some(m) = &mean_pts {
                        value += a * b * (m[i] + m[j]);
                    }
                    force[i * p + j] = kappa[i * p + j] * value;
                }
            }
            let f = product_analyze(&force, truncation, &grid)?;
            for i in 0..dim {
                let mu1 = mu::<R>(Degree::from_index(i).ell());
                for j in 0..dim {
                    let mu2 = mu::<R>(Degree::from_index(j).ell());
                    v[i * dim + j] =
                        (v[i * dim + j] + h * f[i * dim + j]) / (R::one() + h * (mu1 + mu2));
                }
            }
        } else {
            for i in 0..dim {
                let mu1 = mu::<R>(Degree::from_index(i).ell());
                for j in 0..dim {
                    let mu2 = mu::<R>(Degree::from_index(j).ell());
                    v[i * dim + j] /= R::one() + h * (mu1 + mu2);
                }
            }
        }
        elapsed += h;
    }

    Ok(SecondMomentTable {
        degree_max: truncation,
        t_final,
        step,
        entries: v,
    })
}
