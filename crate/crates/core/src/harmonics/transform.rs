//! Spherical-harmonic synthesis and analysis on a quadrature grid.
//!
//! Both directions factor the longitude dependence: a field with band
//! limit L costs O(n_theta · L²) for the Legendre contraction plus
//! O(n_theta · n_phi · L) for the trigonometric sums, instead of the naive
//! O(n_theta · n_phi · L²).

use crate::error::Result;
use crate::real::Real;

use super::legendre::tri_index;
use super::{HarmonicCoeffs, SphereGrid};

/// Evaluates Σ c_{ℓm} Y_{ℓm} at every grid node; row-major [θ, φ].
///
/// Refuses a grid that cannot represent `c.degree_max()` (aliasing would be
/// silent otherwise).
pub fn synthesize<R: Real>(c: &HarmonicCoeffs<R>, grid: &SphereGrid<R>) -> Result<Vec<R>> {
    let l_max = c.degree_max();
    grid.require_degree(l_max)?;
    let sqrt2 = R::of(std::f64::consts::SQRT_2);
    let n_phi = grid.n_phi();
    let mut field = vec![R::zero(); grid.len()];

    // Per θ-node Legendre contractions: a_m = Σ_ℓ c_{ℓ,m} P̄_{ℓm},
    // b_m = Σ_ℓ c_{ℓ,−m} P̄_{ℓm}.
    let mut a = vec![R::zero(); l_max + 1];
    let mut b = vec![R::zero(); l_max + 1];
    for i in 0..grid.n_theta() {
        let plm = grid.plm_at(i);
        a.iter_mut().for_each(|v| *v = R::zero());
        b.iter_mut().for_each(|v| *v = R::zero());
        for ell in 0..=l_max {
            let base = ell * ell + ell;
            let values = c.values();
            for m in 0..=ell {
                let p = plm[tri_index(ell, m)];
                a[m] += values[base + m] * p;
                if m > 0 {
                    b[m] += values[base - m] * p;
                }
            }
        }
        let row = &mut field[i * n_phi..(i + 1) * n_phi];
        for v in row.iter_mut() {
            *v = a[0];
        }
        for m in 1..=l_max {
            let am = sqrt2 * a[m];
            let bm = sqrt2 * b[m];
            let cos_row = grid.cos_row(m);
            let sin_row = grid.sin_row(m);
            for j in 0..n_phi {
                row[j] += am * cos_row[j] + bm * sin_row[j];
            }
        }
    }
    Ok(field)
}

/// Projects a gridded field onto the basis up to degree `l_max`:
/// c_{ℓm} = Σ_nodes w · f · Y_{ℓm}. Exact when f is band-limited and the
/// grid covers the product degree.
pub fn analyze<R: Real>(
    field: &[R],
    grid: &SphereGrid<R>,
    l_max: usize,
) -> Result<HarmonicCoeffs<R>> {
    grid.require_degree(l_max)?;
    assert_eq!(field.len(), grid.len(), "field length does not match grid");
    let sqrt2 = R::of(std::f64::consts::SQRT_2);
    let n_phi = grid.n_phi();
    let mut c = HarmonicCoeffs::zeros(l_max);

    // Longitude sums per θ-node: g_m = Δφ Σ_j f_ij cos(mφ_j), h_m likewise
    // with sin. Then c_{ℓ,m} = Σ_i w_i P̄_{ℓm}(x_i) · √2 g_m (cos branch),
    // c_{ℓ,−m} with h_m, c_{ℓ,0} without the √2.
    let mut g = vec![R::zero(); l_max + 1];
    let mut h = vec![R::zero(); l_max + 1];
    for i in 0..grid.n_theta() {
        let row = &field[i * n_phi..(i + 1) * n_phi];
        let dphi = grid.phi_weight();
        for m in 0..=l_max {
            let cos_row = grid.cos_row(m);
            let sin_row = grid.sin_row(m);
            let mut gc = R::zero();
            let mut hs = R::zero();
            for j in 0..n_phi {
                gc += row[j] * cos_row[j];
                hs += row[j] * sin_row[j];
            }
            g[m] = gc * dphi;
            h[m] = hs * dphi;
        }
        let w = grid.theta_weights()[i];
        let plm = grid.plm_at(i);
        let values = c.values_mut();
        for ell in 0..=l_max {
            let base = ell * ell + ell;
            for m in 0..=ell {
                let wp = w * plm[tri_index(ell, m)];
                if m == 0 {
                    values[base] += wp * g[0];
                } else {
                    values[base + m] += wp * sqrt2 * g[m];
                    values[base - m] += wp * sqrt2 * h[m];
                }
            }
        }
    }
    Ok(c)
}

/// L²(S²) inner product of two coefficient arrays, the shorter zero-padded:
/// Σ c1_{ℓm} c2_{ℓm}.
pub fn inner_product<R: Real>(c1: &HarmonicCoeffs<R>, c2: &HarmonicCoeffs<R>) -> R {
    let n = c1.len().min(c2.len());
    c1.values()[..n]
        .iter()
        .zip(&c2.values()[..n])
        .map(|(&x, &y)| x * y)
        .sum()
}

/// Pointwise product of two gridded fields.
pub fn multiply_fields<R: Real>(f: &[R], g: &[R]) -> Vec<R> {
    assert_eq!(f.len(), g.len());
    f.iter().zip(g).map(|(&x, &y)| x * y).collect()
}

/// Quadrature inner product of two gridded fields on the same grid.
pub fn grid_inner_product<R: Real>(f: &[R], g: &[R], grid: &SphereGrid<R>) -> R {
    assert_eq!(f.len(), grid.len());
    assert_eq!(g.len(), grid.len());
    let n_phi = grid.n_phi();
    let mut total = R::zero();
    for i in 0..grid.n_theta() {
        let mut row_sum = R::zero();
        for j in 0..n_phi {
            row_sum += f[i * n_phi + j] * g[i * n_phi + j];
        }
        total += grid.weight(i) * row_sum;
    }
    total
}
