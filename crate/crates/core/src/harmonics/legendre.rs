//! Legendre polynomials and associated Legendre functions.
//!
//! Internally everything runs on the fully normalized functions
//!
//! ```text
//! P̄_{ℓm}(x) = √((2ℓ+1)/4π · (ℓ−m)!/(ℓ+m)!) · P_ℓ^m(x)
//! ```
//!
//! which stay O(1) for all ℓ, m (∫ P̄² dx = 1/2π for every mode), while the
//! raw P_ℓ^m overflow near ℓ ≈ 150. The Condon–Shortley factor (−1)^m is
//! kept inside P_ℓ^m; it enters the recurrences through the sign of the
//! diagonal seed.
//!
//! Upward recurrence in ℓ at fixed m:
//!
//! ```text
//! P̄_{00} = 1/√(4π)
//! P̄_{mm} = −√((2m+1)/2m) · √(1−x²) · P̄_{m−1,m−1}
//! P̄_{ℓm} = a_{ℓm} (x P̄_{ℓ−1,m} − b_{ℓm} P̄_{ℓ−2,m})
//! a_{ℓm} = √((4ℓ²−1)/(ℓ²−m²))
//! b_{ℓm} = √(((ℓ−1)²−m²)/(4(ℓ−1)²−1))
//! ```

use crate::error::{Error, Result};
use crate::real::Real;

/// Index into a packed (ℓ, m ≥ 0) triangle: ℓ(ℓ+1)/2 + m.
pub(crate) fn tri_index(ell: usize, m: usize) -> usize {
    ell * (ell + 1) / 2 + m
}

/// Number of entries in the packed triangle for degrees 0..=l_max.
pub(crate) fn tri_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Evaluates the fully normalized associated Legendre functions P̄_{ℓm}(x)
/// for all 0 ≤ m ≤ ℓ ≤ `l_max`, packed by [`tri_index`].
pub fn norm_legendre_table<R: Real>(l_max: usize, x: R) -> Vec<R> {
    debug_assert!(x.abs() <= R::one() + R::epsilon(), "argument outside [-1,1]");
    let mut out = vec![R::zero(); tri_len(l_max)];
    // sin θ from cos θ, in the numerically benign factored form.
    let s = ((R::one() - x) * (R::one() + x)).max(R::zero()).sqrt();

    out[0] = R::of(0.25 / std::f64::consts::PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let ratio = R::of_usize(2 * m + 1) / R::of_usize(2 * m);
            out[tri_index(m, m)] = -ratio.sqrt() * s * out[tri_index(m - 1, m - 1)];
        }
        if m + 1 <= l_max {
            out[tri_index(m + 1, m)] = R::of_usize(2 * m + 3).sqrt() * x * out[tri_index(m, m)];
        }
        for ell in (m + 2)..=l_max {
            let ell2 = ell * ell;
            let a = (R::of_usize(4 * ell2 - 1) / R::of_usize(ell2 - m * m)).sqrt();
            let prev2 = (ell - 1) * (ell - 1);
            let b = (R::of_usize(prev2 - m * m) / R::of_usize(4 * prev2 - 1)).sqrt();
            out[tri_index(ell, m)] =
                a * (x * out[tri_index(ell - 1, m)] - b * out[tri_index(ell - 2, m)]);
        }
    }
    out
}

/// Evaluates the raw associated Legendre function P_ℓ^m(x) in the
/// Condon–Shortley convention, P_ℓ^m = (−1)^m (1−x²)^{m/2} dᵐ/dxᵐ P_ℓ.
///
/// Computed by the stable normalized recurrence and rescaled; the rescaling
/// factor is accumulated in log space so it is exact in direction even when
/// the raw value itself is astronomically large.
pub fn assoc_legendre<R: Real>(ell: usize, m: usize, x: R) -> Result<R> {
    if m > ell {
        return Err(Error::Domain(format!(
            "order m={m} exceeds degree ell={ell}"
        )));
    }
    if x.abs() > R::one() {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let table = norm_legendre_table(ell, x);
    // ln(1/N_{ℓm}) = ½ (ln 4π − ln(2ℓ+1) + Σ_{j=ℓ−m+1}^{ℓ+m} ln j)
    let mut log_scale = R::of(4.0 * std::f64::consts::PI).ln() - R::of_usize(2 * ell + 1).ln();
    for j in (ell - m + 1)..=(ell + m) {
        log_scale += R::of_usize(j).ln();
    }
    Ok(table[tri_index(ell, m)] * (log_scale * R::of(0.5)).exp())
}

/// Evaluates the Legendre polynomials P_0(x), ..., P_{l_max}(x) by the
/// three-term recurrence (n+1) P_{n+1} = (2n+1) x P_n − n P_{n−1}.
pub fn legendre_table<R: Real>(l_max: usize, x: R) -> Vec<R> {
    let mut out = vec![R::zero(); l_max + 1];
    out[0] = R::one();
    if l_max == 0 {
        return out;
    }
    out[1] = x;
    for n in 2..=l_max {
        let nf = R::of_usize(n);
        let a = (R::of_usize(2 * n - 1) * x * out[n - 1] - (nf - R::one()) * out[n - 2]) / nf;
        out[n] = a;
    }
    out
}

/// Single Legendre polynomial P_ℓ(x).
pub fn legendre_p<R: Real>(ell: usize, x: R) -> R {
    legendre_table(ell, x)[ell]
}
