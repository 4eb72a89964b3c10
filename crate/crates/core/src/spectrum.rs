//! Angular power spectra of isotropic Gaussian fields on the sphere and
//! sampling of such fields in coefficient space.
//!
//! A spectrum assigns a variance `A_ℓ >= 0` to every degree `ℓ`; modes of
//! equal degree share it. The driving noise operator `Q` acts diagonally as
//! `Q Y_{ℓm} = A_ℓ Y_{ℓm}`, so `Tr(Q) = Σ_ℓ (2ℓ+1) A_ℓ` and the covariance
//! kernel of a centred field with this spectrum depends on position only
//! through the angle between the two points.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonics::{legendre_table, Degree, HarmonicCoeffs};
use crate::real::Real;

/// Per-degree variances `A_ℓ` for `ℓ = 0..=degree_max`, zero beyond.
///
/// Entries are validated to be finite and non-negative. Degrees with
/// `A_ℓ = 0` are legal and simply carry no noise.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularPowerSpectrum<R> {
    a: Vec<R>,
}

impl<R: Real> AngularPowerSpectrum<R> {
    /// Builds a spectrum from per-degree variances, `a[ell] = A_ℓ`.
    pub fn new(a: Vec<R>) -> Result<Self> {
        for (ell, &v) in a.iter().enumerate() {
            if !v.is_finite() || v < R::zero() {
                return Err(Error::Invalid(format!(
                    "spectrum entry A_{ell} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(Self { a })
    }

    /// Spectrum that is identically zero.
    pub fn zero() -> Self {
        Self { a: Vec::new() }
    }

    /// `A_ℓ = value` for `ℓ <= degree_max`.
    pub fn constant(value: R, degree_max: usize) -> Result<Self> {
        Self::new(vec![value; degree_max + 1])
    }

    /// `A_0 = 100`, `A_ℓ = 100/ℓ²` for `1 <= ℓ <= 10`, zero beyond.
    ///
    /// The inverse-square decay keeps `Σ (2ℓ+1) A_ℓ` dominated by the low
    /// degrees while still exercising every mode up to degree ten.
    pub fn inverse_square_demo() -> Self {
        let hundred = R::of(100.0);
        let mut a = vec![hundred];
        for ell in 1..=10usize {
            a.push(hundred / R::of_usize(ell * ell));
        }
        Self { a }
    }

    /// Highest degree stored; `A_ℓ = 0` for larger `ℓ`. Zero for the empty
    /// spectrum.
    pub fn degree_max(&self) -> usize {
        self.a.len().saturating_sub(1)
    }

    /// Stored entries.
    pub fn values(&self) -> &[R] {
        &self.a
    }

    /// `A_ℓ`, zero beyond the stored range.
    pub fn value(&self, ell: usize) -> R {
        self.a.get(ell).copied().unwrap_or_else(R::zero)
    }

    /// `sqrt(A_ℓ)`.
    pub fn amplitude(&self, ell: usize) -> R {
        self.value(ell).sqrt()
    }

    /// `Tr(Q) = Σ_ℓ (2ℓ+1) A_ℓ` over the stored range.
    pub fn trace(&self) -> R {
        self.a
            .iter()
            .enumerate()
            .map(|(ell, &v)| R::of_usize(2 * ell + 1) * v)
            .sum()
    }

    /// Trace of the part beyond `lambda`: `Σ_{ℓ > lambda} (2ℓ+1) A_ℓ`.
    ///
    /// This is the spectral mass a noise truncation at `lambda` discards.
    pub fn tail_trace(&self, lambda: usize) -> R {
        self.a
            .iter()
            .enumerate()
            .skip(lambda + 1)
            .map(|(ell, &v)| R::of_usize(2 * ell + 1) * v)
            .sum()
    }
}

/// Covariance `E[T(x) T(y)] = Σ_ℓ A_ℓ (2ℓ+1)/(4π) P_ℓ(x·y)` of a centred
/// isotropic field with the given spectrum, as a function of `cos γ = x·y`.
pub fn covariance_kernel<R: Real>(spec: &AngularPowerSpectrum<R>, cosgamma: R) -> R {
    assert!(
        cosgamma.abs() <= R::one(),
        "cosine of an angle must lie in [-1, 1]"
    );
    if spec.values().is_empty() {
        return R::zero();
    }
    let p = legendre_table(spec.degree_max(), cosgamma);
    let four_pi = R::of(4.0) * R::PI();
    spec.values()
        .iter()
        .enumerate()
        .map(|(ell, &v)| v * R::of_usize(2 * ell + 1) * p[ell])
        .sum::<R>()
        / four_pi
}

/// Draws coefficients of an isotropic Gaussian field with the given spectrum
/// and pointwise mean.
///
/// Coefficients are independent with `c_{ℓm} ~ N(0, A_ℓ)` for `ℓ >= 1` and
/// `c_{00} ~ N(mean·2√π, A_0)`: a constant field of height `h` has
/// `c_{00} = h·2√π`, so the mean enters through that mode alone.
pub fn sample_isotropic_field<R: Real>(
    spec: &AngularPowerSpectrum<R>,
    mean: R,
    rng: &mut impl Rng,
) -> HarmonicCoeffs<R> {
    let degree_max = spec.degree_max();
    let mut coeffs = HarmonicCoeffs::zeros(degree_max);
    for d in Degree::modes_up_to(degree_max) {
        let z: f64 = rng.sample(StandardNormal);
        coeffs[d] = spec.amplitude(d.ell()) * R::of(z);
    }
    let mean_00 = mean * R::of(2.0) * R::PI().sqrt();
    coeffs[Degree::new(0, 0)] += mean_00;
    coeffs
}
