//! Quadrature grid on the sphere: Gauss–Legendre nodes in cos θ crossed
//! with uniform longitudes.
//!
//! A grid built for degree L has n_theta = L+1 and n_phi = 2L+2 and
//! integrates products Y_{ℓm} Y_{ℓ'm'} exactly for ℓ, ℓ' ≤ L: the
//! θ-integrand is a polynomial in cos θ of degree ≤ 2L (Gauss–Legendre with
//! L+1 nodes is exact through degree 2L+1), and the φ-integrand holds
//! frequencies ≤ 2L (a uniform rule with 2L+2 points is exact through
//! frequency 2L+1).
//!
//! Gauss nodes are interior, so grids never touch the poles.

use crate::error::{Error, Result};
use crate::real::Real;

use super::legendre;

/// Gauss–Legendre rule with `n` nodes on [−1, 1], returned ascending.
///
/// Nodes are the roots of P_n found by Newton iteration from the Chebyshev
/// initial guesses x₀ = cos(π(i−1/4)/(n+1/2)); weights are
/// w = 2 / ((1−x²) P_n′(x)²).
pub fn gauss_legendre_rule<R: Real>(n: usize) -> (Vec<R>, Vec<R>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![R::zero(); n];
    let mut weights = vec![R::zero(); n];
    let tol = R::epsilon() * R::of(4.0);
    for i in 0..n {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = R::of(guess);
        let mut dp = R::one();
        for _ in 0..100 {
            let (p, d) = legendre_value_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol * (R::one() + x.abs()) {
                let (_, d_final) = legendre_value_and_deriv(n, x);
                dp = d_final;
                break;
            }
        }
        nodes[i] = x;
        weights[i] = R::of(2.0) / ((R::one() - x * x) * dp * dp);
    }
    // The Chebyshev guesses run descending; callers get ascending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// P_n(x) and P_n′(x) via the three-term recurrence and the derivative
/// identity (1−x²) P_n′ = n (P_{n−1} − x P_n). Valid for |x| < 1.
fn legendre_value_and_deriv<R: Real>(n: usize, x: R) -> (R, R) {
    let mut p_prev = R::one();
    if n == 0 {
        return (p_prev, R::zero());
    }
    let mut p = x;
    for k in 2..=n {
        let kf = R::of_usize(k);
        let next = (R::of_usize(2 * k - 1) * x * p - (kf - R::one()) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let d = R::of_usize(n) * (p_prev - x * p) / (R::one() - x * x);
    (p, d)
}

/// Product quadrature grid exact for spherical-harmonic products up to a
/// fixed degree, with per-node Legendre and longitude tables precomputed for
/// the transforms.
#[derive(Clone, Debug)]
pub struct SphereGrid<R> {
    degree: usize,
    n_theta: usize,
    n_phi: usize,
    x_nodes: Vec<R>,
    theta_nodes: Vec<R>,
    theta_weights: Vec<R>,
    phi_weight: R,
    /// P̄_{ℓm}(x_i) for ℓ ≤ degree, packed triangle per node.
    plm: Vec<R>,
    /// cos(m φ_j), (degree+1) × n_phi row-major.
    cos_m_phi: Vec<R>,
    /// sin(m φ_j), same layout.
    sin_m_phi: Vec<R>,
}

/// Builds the quadrature grid for band limit `degree`.
pub fn build_grid<R: Real>(degree: usize) -> SphereGrid<R> {
    let n_theta = degree + 1;
    let n_phi = 2 * degree + 2;
    let (x_nodes, theta_weights) = gauss_legendre_rule::<R>(n_theta);
    let theta_nodes: Vec<R> = x_nodes.iter().map(|&x| x.acos()).collect();

    let tri = legendre::tri_len(degree);
    let mut plm = vec![R::zero(); n_theta * tri];
    for (i, &x) in x_nodes.iter().enumerate() {
        plm[i * tri..(i + 1) * tri].copy_from_slice(&legendre::norm_legendre_table(degree, x));
    }

    let mut cos_m_phi = vec![R::zero(); (degree + 1) * n_phi];
    let mut sin_m_phi = vec![R::zero(); (degree + 1) * n_phi];
    for m in 0..=degree {
        for j in 0..n_phi {
            // Reduce m·j mod n_phi in integers so periodicity is exact.
            let angle = R::of(2.0 * std::f64::consts::PI * ((m * j) % n_phi) as f64 / n_phi as f64);
            cos_m_phi[m * n_phi + j] = angle.cos();
            sin_m_phi[m * n_phi + j] = angle.sin();
        }
    }

    SphereGrid {
        degree,
        n_theta,
        n_phi,
        x_nodes,
        theta_nodes,
        theta_weights,
        phi_weight: R::of(2.0 * std::f64::consts::PI) / R::of_usize(n_phi),
        plm,
        cos_m_phi,
        sin_m_phi,
    }
}

impl<R: Real> SphereGrid<R> {
    /// Largest degree whose products this grid integrates exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// Number of grid points; field arrays use row-major [θ, φ] layout.
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_nodes(&self) -> &[R] {
        &self.x_nodes
    }

    pub fn theta_nodes(&self) -> &[R] {
        &self.theta_nodes
    }

    pub fn theta_weights(&self) -> &[R] {
        &self.theta_weights
    }

    /// Longitude of column j.
    pub fn phi(&self, j: usize) -> R {
        R::of(2.0 * std::f64::consts::PI) * R::of_usize(j) / R::of_usize(self.n_phi)
    }

    /// Quadrature weight of the full grid point (i, j).
    pub fn weight(&self, i: usize) -> R {
        self.theta_weights[i] * self.phi_weight
    }

    pub(crate) fn phi_weight(&self) -> R {
        self.phi_weight
    }

    /// Normalized Legendre triangle at θ-node i.
    pub(crate) fn plm_at(&self, i: usize) -> &[R] {
        let tri = legendre::tri_len(self.degree);
        &self.plm[i * tri..(i + 1) * tri]
    }

    pub(crate) fn cos_row(&self, m: usize) -> &[R] {
        &self.cos_m_phi[m * self.n_phi..(m + 1) * self.n_phi]
    }

    pub(crate) fn sin_row(&self, m: usize) -> &[R] {
        &self.sin_m_phi[m * self.n_phi..(m + 1) * self.n_phi]
    }

    /// Refuses degrees this grid cannot represent exactly.
    pub(crate) fn require_degree(&self, requested: usize) -> Result<()> {
        if requested > self.degree {
            return Err(Error::GridTooCoarse {
                supported: self.degree,
                requested,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_matches_published_five_point_values() {
        let (x, w) = gauss_legendre_rule::<f64>(5);
        let x_ref = [
            -0.9061798459386640,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.9061798459386640,
        ];
        let w_ref = [
            0.2369268850561891,
            0.4786286704993665,
            0.5688888888888889,
            0.4786286704993665,
            0.2369268850561891,
        ];
        for i in 0..5 {
            assert!((x[i] - x_ref[i]).abs() < 1e-14, "node {i}");
            assert!((w[i] - w_ref[i]).abs() < 1e-14, "weight {i}");
        }
    }

    #[test]
    fn rule_integrates_monomials_exactly() {
        for n in 1..=40 {
            let (x, w) = gauss_legendre_rule::<f64>(n);
            for k in (0..2 * n).step_by(2) {
                let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
                let exact = 2.0 / (k as f64 + 1.0);
                assert!(
                    (integral - exact).abs() < 1e-12 * exact.abs(),
                    "n={n} k={k}: {integral} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn single_node_rule() {
        // Degree 0: one θ-node at cos θ = 0 with weight 2.
        let g = build_grid::<f64>(0);
        assert_eq!(g.n_theta(), 1);
        assert_eq!(g.n_phi(), 2);
        assert!(g.x_nodes()[0].abs() < 1e-15);
        assert!((g.theta_weights()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn total_weight_is_sphere_area() {
        for degree in [0usize, 1, 7, 33, 90] {
            let g = build_grid::<f64>(degree);
            let total: f64 = (0..g.n_theta())
                .map(|i| g.weight(i) * g.n_phi() as f64)
                .sum();
            let area = 4.0 * std::f64::consts::PI;
            assert!(
                ((total - area) / area).abs() < 1e-12,
                "degree {degree}: total {total}"
            );
        }
    }
}
