//! Spectral simulation of stochastic heat equations on the unit sphere.
//!
//! The library discretizes dX = Δ*X dt + B(X) dW in space by truncating the
//! real spherical-harmonic expansion at a band limit L, and in time by a
//! drift-implicit Euler–Maruyama scheme on a non-uniform grid that gives
//! each noise degree its own step count. Supporting subsystems: isotropic
//! Gaussian field sampling from an angular power spectrum, exact rational
//! time grids with semigroup-product evaluators, a multiplicative noise
//! operator with per-mode multipliers, and diagnostics (strong-error Monte
//! Carlo, convergence sweeps, isotropy tests, a second-moment ODE).
//!
//! All numerics are generic over the scalar type via [`real::Real`];
//! the aliases below fix f64, which every shipped tool uses.

pub mod error;
pub mod harmonics;
pub mod increments;
pub mod diagnostics;
pub mod noise;
pub mod real;
pub mod solver;
pub mod spectrum;
pub mod timegrid;

pub use diagnostics::{
    convergence_sweep, error_bound_components, isotropy_test, mc_error_estimate, path_error,
    reference_config, second_moment_ode, second_moment_ode_with_step, CovarianceEstimate,
    ErrorReport, IsotropyVerdict, SecondMomentTable, Surrogate, SweepAxis, SweepResult,
};
pub use error::{Error, Result};
pub use harmonics::{Degree, HarmonicCoeffs, SphereGrid};
pub use increments::{generate_increments, IncrementTable};
pub use noise::{GFunction, NoiseSpec};
pub use real::Real;
pub use solver::{
    coupled_pair, euler_step, exact_heat_flow, reference_path, simulate_path, simulate_path_with,
    AssemblyPath, PathSample, SchemeConfig, Stepper,
};
pub use spectrum::{covariance_kernel, sample_isotropic_field, AngularPowerSpectrum};
pub use timegrid::{build_time_grid, GammaEvaluator, StepAllocation, Time, TimeGrid};

/// f64 coefficient array.
pub type Coeffs = harmonics::HarmonicCoeffs<f64>;
/// f64 quadrature grid.
pub type Grid = harmonics::SphereGrid<f64>;
/// f64 angular power spectrum.
pub type Spectrum = spectrum::AngularPowerSpectrum<f64>;
/// f64 Brownian increment table.
pub type Increments = increments::IncrementTable<f64>;
/// f64 scheme configuration.
pub type Config = solver::SchemeConfig<f64>;
/// f64 simulated path.
pub type Path = solver::PathSample<f64>;
/// f64 error report.
pub type Report = diagnostics::ErrorReport<f64>;
/// f64 covariance estimate.
pub type Covariance = diagnostics::CovarianceEstimate<f64>;
/// f64 second-moment coefficient table.
pub type SecondMoments = diagnostics::SecondMomentTable<f64>;
