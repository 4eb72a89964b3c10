//! Real spherical-harmonic basis on the unit sphere.
//!
//! The basis functions are indexed by a degree ℓ ≥ 0 and an order m with
//! |m| ≤ ℓ, and are real-valued:
//!
//! ```text
//! Y_{ℓ0}(θ,φ) = √((2ℓ+1)/4π) · P_ℓ(cos θ)
//! Y_{ℓm}(θ,φ) = √2 · N_{ℓm} · P_ℓ^m(cos θ) · cos(mφ)     m > 0
//! Y_{ℓm}(θ,φ) = √2 · N_{ℓ|m|} · P_ℓ^{|m|}(cos θ) · sin(|m|φ)   m < 0
//! ```
//!
//! with N_{ℓm} = √((2ℓ+1)/4π · (ℓ−m)!/(ℓ+m)!) and the Condon–Shortley
//! factor (−1)^m kept inside P_ℓ^m. The family is orthonormal in L²(S²)
//! and diagonalizes the Laplace–Beltrami operator with eigenvalues
//! −μ_ℓ = −ℓ(ℓ+1).
//!
//! Colatitude θ runs over [0,π], longitude φ over [0,2π). At the poles
//! (θ = 0 or π) the longitude is taken to be φ = 0; no branch is needed in
//! evaluation because every m ≠ 0 term vanishes there.

mod grid;
mod legendre;
mod transform;

pub use grid::{build_grid, gauss_legendre_rule, SphereGrid};
pub use legendre::{assoc_legendre, legendre_p, legendre_table, norm_legendre_table};
pub use transform::{analyze, grid_inner_product, inner_product, multiply_fields, synthesize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Laplace–Beltrami eigenvalue magnitude μ_ℓ = ℓ(ℓ+1).
pub fn mu<R: Real>(ell: usize) -> R {
    R::of_usize(ell) * R::of_usize(ell + 1)
}

/// Index (ℓ, m) of one real spherical harmonic, with |m| ≤ ℓ.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Degree {
    ell: usize,
    m: isize,
}

impl Degree {
    /// Builds the index pair; panics if |m| > ℓ (a programming error).
    pub fn new(ell: usize, m: isize) -> Self {
        assert!(
            m.unsigned_abs() <= ell,
            "harmonic order |{m}| exceeds degree {ell}"
        );
        Degree { ell, m }
    }

    /// Fallible constructor for indices read from external input.
    pub fn checked(ell: usize, m: isize) -> Result<Self> {
        if m.unsigned_abs() > ell {
            return Err(Error::Invalid(format!(
                "harmonic order |{m}| exceeds degree {ell}"
            )));
        }
        Ok(Degree { ell, m })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn m(&self) -> isize {
        self.m
    }

    /// Linear index ℓ² + ℓ + m; bijective onto 0..(L+1)² for ℓ ≤ L.
    pub fn index(&self) -> usize {
        ((self.ell * self.ell + self.ell) as isize + self.m) as usize
    }

    /// Inverse of [`Degree::index`].
    pub fn from_index(index: usize) -> Self {
        let mut ell = (index as f64).sqrt() as usize;
        // Float sqrt can land one off near perfect squares.
        while (ell + 1) * (ell + 1) <= index {
            ell += 1;
        }
        while ell * ell > index {
            ell -= 1;
        }
        let m = index as isize - (ell * ell + ell) as isize;
        Degree { ell, m }
    }

    /// All modes with ℓ ≤ `degree_max` in linear-index order.
    pub fn modes_up_to(degree_max: usize) -> impl Iterator<Item = Degree> {
        (0..=degree_max)
            .flat_map(|ell| (-(ell as isize)..=ell as isize).map(move |m| Degree { ell, m }))
    }
}

impl std::fmt::Display for Degree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.ell, self.m)
    }
}

/// Triangular coefficient array c_{ℓm} for 0 ≤ ℓ ≤ L, |m| ≤ ℓ, stored
/// contiguously in linear-index order. A degree-L array is a prefix of any
/// degree-L′ > L array, so truncation and zero-padding are slice operations.
#[derive(Clone, PartialEq, Debug)]
pub struct HarmonicCoeffs<R> {
    degree_max: usize,
    values: Vec<R>,
}

impl<R: Real> HarmonicCoeffs<R> {
    pub fn zeros(degree_max: usize) -> Self {
        HarmonicCoeffs {
            degree_max,
            values: vec![R::zero(); (degree_max + 1) * (degree_max + 1)],
        }
    }

    /// Wraps an existing linear-index-ordered value array.
    pub fn from_values(degree_max: usize, values: Vec<R>) -> Result<Self> {
        let expect = (degree_max + 1) * (degree_max + 1);
        if values.len() != expect {
            return Err(Error::Invalid(format!(
                "coefficient array has length {}, degree {} needs {}",
                values.len(),
                degree_max,
                expect
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "coefficient array contains a non-finite entry".into(),
            ));
        }
        Ok(HarmonicCoeffs { degree_max, values })
    }

    /// A single unit coefficient at `d`, zero elsewhere.
    pub fn unit(degree_max: usize, d: Degree) -> Self {
        let mut c = Self::zeros(degree_max);
        c[d] = R::one();
        c
    }

    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    /// Coefficient at `d`; zero beyond the stored degree.
    pub fn get(&self, d: Degree) -> R {
        if d.ell() > self.degree_max {
            R::zero()
        } else {
            self.values[d.index()]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Degree, R)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (Degree::from_index(i), v))
    }

    /// Copy with the stated degree: a prefix for smaller degrees, zero-padded
    /// for larger ones.
    pub fn resized(&self, degree_max: usize) -> Self {
        let expect = (degree_max + 1) * (degree_max + 1);
        let mut values = vec![R::zero(); expect];
        let keep = expect.min(self.values.len());
        values[..keep].copy_from_slice(&self.values[..keep]);
        HarmonicCoeffs { degree_max, values }
    }

    /// self += s · other, matching modes by index; other may have any degree.
    pub fn add_scaled(&mut self, other: &Self, s: R) {
        let keep = self.values.len().min(other.values.len());
        for i in 0..keep {
            self.values[i] = self.values[i] + s * other.values[i];
        }
    }

    pub fn scale(&mut self, s: R) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }

    /// Squared L²(S²) norm via Parseval: Σ c_{ℓm}².
    pub fn norm_sq(&self) -> R {
        self.values.iter().map(|&v| v * v).sum()
    }
}

impl<R: Real> std::ops::Index<Degree> for HarmonicCoeffs<R> {
    type Output = R;
    fn index(&self, d: Degree) -> &R {
        &self.values[d.index()]
    }
}

impl<R: Real> std::ops::IndexMut<Degree> for HarmonicCoeffs<R> {
    fn index_mut(&mut self, d: Degree) -> &mut R {
        &mut self.values[d.index()]
    }
}

/// Evaluates the real spherical harmonic Y_{ℓm} at colatitude θ ∈ [0,π],
/// longitude φ ∈ [0,2π).
pub fn eval_ylm<R: Real>(d: Degree, theta: R, phi: R) -> R {
    let table = norm_legendre_table(d.ell(), theta.cos());
    let m_abs = d.m().unsigned_abs();
    let p = table[legendre::tri_index(d.ell(), m_abs)];
    let sqrt2 = R::of(std::f64::consts::SQRT_2);
    let m_phi = R::of_usize(m_abs) * phi;
    match d.m().cmp(&0) {
        std::cmp::Ordering::Equal => p,
        std::cmp::Ordering::Greater => sqrt2 * p * m_phi.cos(),
        std::cmp::Ordering::Less => sqrt2 * p * m_phi.sin(),
    }
}
