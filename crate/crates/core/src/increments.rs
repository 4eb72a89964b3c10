//! Brownian increments driving the scheme, one independent standard Brownian
//! motion per noise mode `(ℓ', m')`.
//!
//! Increments are drawn on the merged breakpoint partition (the finest grid
//! in play) and aggregated upward by exact summation: the stored increment
//! over a mode's own step equals the left-to-right sum of its sub-increments
//! bit for bit. Aggregating a table onto a coarser grid whose breakpoints are
//! a subset of the table's reuses the same draws, so a run on the coarse grid
//! and a run on the fine grid see the same underlying Brownian paths.
//!
//! Each mode owns a counter-based stream derived from `(seed, ℓ', m')`, so
//! the draws for one mode do not depend on how many other modes exist, and
//! distinct modes may be generated concurrently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonics::Degree;
use crate::real::Real;
use crate::spectrum::AngularPowerSpectrum;
use crate::timegrid::{ratio_to_real, Time, TimeGrid};

/// Standard Brownian increments for every mode `(ℓ', m')` with `ℓ' <= Λ`,
/// stored both per merged segment and per own-grid step.
///
/// `sub[mode][k-1]` is the increment over `(τ_{k-1}, τ_k]`; `own[mode][j-1]`
/// is the increment over mode `ℓ'`'s own step `((j-1)/n_ℓ', j/n_ℓ']` and is
/// the exact sum of the sub-increments it spans. Immutable once built.
#[derive(Clone, Debug)]
pub struct IncrementTable<R> {
    seed: u64,
    lambda: usize,
    n: Vec<u64>,
    tau: Vec<Time>,
    sub: Vec<Vec<R>>,
    own: Vec<Vec<R>>,
}

/// Draws the increment table for all modes `ℓ' <= lambda` on the merged
/// partition of `grid`.
///
/// Mode `(ℓ', m')` consumes one stream of standard normals indexed by
/// `(seed, ℓ'² + ℓ' + m')` and scales them by the square root of each merged
/// segment length, so every stored increment is `N(0, Δt)` in distribution
/// and re-running with the same seed reproduces the table exactly. The
/// spectrum itself never scales the draws (amplitudes `√A_ℓ'` enter in the
/// scheme); it is taken here to pin the valid mode range.
pub fn generate_increments<R: Real>(
    spec: &AngularPowerSpectrum<R>,
    lambda: usize,
    grid: &TimeGrid,
    seed: u64,
) -> IncrementTable<R> {
    assert!(
        lambda <= spec.degree_max() || spec.values().is_empty() && lambda == 0,
        "noise truncation degree {lambda} exceeds the spectrum range {}",
        spec.degree_max()
    );
    assert!(
        grid.lambda() >= lambda,
        "time grid allocates degrees up to {} but modes up to {lambda} were requested",
        grid.lambda()
    );
    let num_steps = grid.num_steps();
    let step_len: Vec<R> = (1..=num_steps)
        .map(|k| ratio_to_real::<R>(grid.tau()[k] - grid.tau()[k - 1]).sqrt())
        .collect();
    let mut sub = Vec::with_capacity((lambda + 1) * (lambda + 1));
    for d in Degree::modes_up_to(lambda) {
        let mut stream = ChaCha12Rng::seed_from_u64(seed);
        stream.set_stream(d.index() as u64);
        let draws: Vec<R> = step_len
            .iter()
            .map(|&s| {
                let z: f64 = stream.sample(StandardNormal);
                s * R::of(z)
            })
            .collect();
        sub.push(draws);
    }
    let own = own_from_sub(grid, lambda, &sub);
    IncrementTable {
        seed,
        lambda,
        n: grid.step_counts()[..=lambda].to_vec(),
        tau: grid.tau().to_vec(),
        sub,
        own,
    }
}

/// Sums each mode's sub-increments into its own-grid steps, left to right.
fn own_from_sub<R: Real>(grid: &TimeGrid, lambda: usize, sub: &[Vec<R>]) -> Vec<Vec<R>> {
    let mut own = Vec::with_capacity(sub.len());
    for d in Degree::modes_up_to(lambda) {
        let ell = d.ell();
        let mut steps = Vec::with_capacity(grid.step_counts()[ell] as usize);
        let mut running = R::zero();
        for k in 1..=grid.num_steps() {
            running += sub[d.index()][k - 1];
            if grid.node_index(k, ell).is_some() {
                steps.push(running);
                running = R::zero();
            }
        }
        debug_assert_eq!(steps.len() as u64, grid.step_counts()[ell]);
        own.push(steps);
    }
    own
}

impl<R: Real> IncrementTable<R> {
    /// Seed the table was drawn from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Highest mode degree stored.
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Own-grid step counts for degrees `0..=lambda`.
    pub fn step_counts(&self) -> &[u64] {
        &self.n
    }

    /// Breakpoints of the partition the table is drawn on.
    pub fn breakpoints(&self) -> &[Time] {
        &self.tau
    }

    /// Number of merged segments.
    pub fn num_steps(&self) -> usize {
        self.tau.len() - 1
    }

    /// Per-segment increments of mode `d`, entry `k-1` covering
    /// `(τ_{k-1}, τ_k]`.
    pub fn sub_increments(&self, d: Degree) -> &[R] {
        &self.sub[d.index()]
    }

    /// Own-grid increments of mode `d`, entry `j-1` covering
    /// `((j-1)/n_ℓ', j/n_ℓ']`.
    pub fn own_increments(&self, d: Degree) -> &[R] {
        &self.own[d.index()]
    }

    /// Increment of mode `d` over its own step ending at node `j/n_ℓ'`,
    /// `1 <= j <= n_ℓ'`.
    pub fn own_increment_ending_at(&self, d: Degree, j: u64) -> R {
        assert!(j >= 1, "own-grid steps are numbered from one");
        self.own[d.index()][(j - 1) as usize]
    }

    /// Whether the table was drawn on exactly this grid's partition and step
    /// counts (for degrees the table stores).
    pub fn matches(&self, grid: &TimeGrid) -> bool {
        grid.lambda() >= self.lambda
            && grid.step_counts()[..=self.lambda] == self.n[..]
            && grid.tau() == self.tau
    }

    /// Re-sums this table onto a coarser grid whose breakpoints all appear in
    /// this table's partition.
    ///
    /// Draws are reused, not redrawn: each coarse segment is the exact sum of
    /// the fine segments it spans, which is what couples a coarse run to a
    /// fine reference run from the same seed. Fails if some breakpoint of
    /// `coarse` is missing here or `coarse` lacks a degree the table stores.
    pub fn aggregate_to(&self, coarse: &TimeGrid) -> Result<IncrementTable<R>> {
        if coarse.lambda() < self.lambda {
            return Err(Error::Invalid(format!(
                "target grid stops at degree {} but the table stores modes up to {}",
                coarse.lambda(),
                self.lambda
            )));
        }
        let positions: Vec<usize> = coarse
            .tau()
            .iter()
            .map(|t| {
                self.tau.binary_search(t).map_err(|_| {
                    Error::Invalid(format!(
                        "breakpoint {t} of the target grid is not in the table's partition"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let mut sub = Vec::with_capacity(self.sub.len());
        for d in Degree::modes_up_to(self.lambda) {
            let fine = &self.sub[d.index()];
            let coarse_subs: Vec<R> = positions
                .windows(2)
                .map(|w| fine[w[0]..w[1]].iter().copied().sum())
                .collect();
            sub.push(coarse_subs);
        }
        let own = own_from_sub(coarse, self.lambda, &sub);
        Ok(IncrementTable {
            seed: self.seed,
            lambda: self.lambda,
            n: coarse.step_counts()[..=self.lambda].to_vec(),
            tau: coarse.tau().to_vec(),
            sub,
            own,
        })
    }

    /// Copy keeping only modes of degree `lambda` and below. The kept modes'
    /// draws are unchanged, so runs consuming the copy stay coupled to runs
    /// consuming the full table.
    pub fn truncated_modes(&self, lambda: usize) -> IncrementTable<R> {
        assert!(
            lambda <= self.lambda,
            "the table stores modes up to {}, cannot keep {lambda}",
            self.lambda
        );
        let dim = (lambda + 1) * (lambda + 1);
        IncrementTable {
            seed: self.seed,
            lambda,
            n: self.n[..=lambda].to_vec(),
            tau: self.tau.clone(),
            sub: self.sub[..dim].to_vec(),
            own: self.own[..dim].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegrid::build_time_grid;

    fn unit_spec(degree_max: usize) -> AngularPowerSpectrum<f64> {
        AngularPowerSpectrum::constant(1.0, degree_max).unwrap()
    }

    #[test]
    fn dropping_high_modes_keeps_the_remaining_draws() {
        let grid = build_time_grid(&[2, 3, 4]).unwrap();
        let table = generate_increments(&unit_spec(2), 2, &grid, 11);
        let kept = table.truncated_modes(1);
        assert_eq!(kept.lambda(), 1);
        assert_eq!(kept.step_counts(), &grid.step_counts()[..=1]);
        for d in Degree::modes_up_to(1) {
            assert_eq!(kept.sub_increments(d), table.sub_increments(d));
            assert_eq!(kept.own_increments(d), table.own_increments(d));
        }
        // The truncated table still aggregates onto a grid for fewer modes.
        let coarse = build_time_grid(&[2, 3]).unwrap();
        let again = kept.aggregate_to(&coarse).unwrap();
        assert!(again.matches(&coarse));
    }

    #[test]
    fn single_step_modes_store_one_increment() {
        let grid = build_time_grid(&[1, 1]).unwrap();
        let table = generate_increments(&unit_spec(1), 1, &grid, 42);
        for d in Degree::modes_up_to(1) {
            assert_eq!(table.own_increments(d).len(), 1);
            assert_eq!(table.sub_increments(d).len(), 1);
            assert_eq!(table.own_increments(d)[0], table.sub_increments(d)[0]);
        }
    }

    #[test]
    fn own_steps_sum_their_segments_exactly() {
        let grid = build_time_grid(&[2, 3]).unwrap();
        // Merged breakpoints 0, 1/3, 1/2, 2/3, 1.
        let table = generate_increments(&unit_spec(1), 1, &grid, 7);
        for d in Degree::modes_up_to(1) {
            let sub = table.sub_increments(d);
            let own = table.own_increments(d);
            if d.ell() == 0 {
                assert_eq!(own, &[(sub[0] + sub[1]), (sub[2] + sub[3])]);
                assert_eq!(table.own_increment_ending_at(d, 2), own[1]);
            } else {
                assert_eq!(own, &[sub[0], (sub[1] + sub[2]), sub[3]]);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_and_seeds_differ() {
        let grid = build_time_grid(&[2, 3]).unwrap();
        let a = generate_increments(&unit_spec(1), 1, &grid, 9);
        let b = generate_increments(&unit_spec(1), 1, &grid, 9);
        let c = generate_increments(&unit_spec(1), 1, &grid, 10);
        for d in Degree::modes_up_to(1) {
            assert_eq!(a.sub_increments(d), b.sub_increments(d));
            assert_ne!(a.sub_increments(d), c.sub_increments(d));
        }
    }

    #[test]
    fn enlarging_the_mode_set_keeps_existing_streams() {
        let grid = build_time_grid(&[2, 3, 4]).unwrap();
        let small = generate_increments(&unit_spec(2), 1, &grid, 5);
        let large = generate_increments(&unit_spec(2), 2, &grid, 5);
        for d in Degree::modes_up_to(1) {
            assert_eq!(small.sub_increments(d), large.sub_increments(d));
        }
    }

    #[test]
    fn aggregation_to_own_grid_is_identity() {
        let grid = build_time_grid(&[2, 3]).unwrap();
        let table = generate_increments(&unit_spec(1), 1, &grid, 11);
        let again = table.aggregate_to(&grid).unwrap();
        for d in Degree::modes_up_to(1) {
            assert_eq!(table.sub_increments(d), again.sub_increments(d));
            assert_eq!(table.own_increments(d), again.own_increments(d));
        }
    }

    #[test]
    fn aggregation_rejects_unrelated_partitions() {
        let fine = build_time_grid(&[2, 3]).unwrap();
        let table = generate_increments(&unit_spec(1), 1, &fine, 3);
        let other = build_time_grid(&[5, 5]).unwrap();
        assert!(table.aggregate_to(&other).is_err());
        let short = build_time_grid(&[6]).unwrap();
        assert!(table.aggregate_to(&short).is_err());
    }

    #[test]
    fn table_matches_only_its_grid() {
        let grid = build_time_grid(&[2, 3]).unwrap();
        let table = generate_increments(&unit_spec(1), 1, &grid, 3);
        assert!(table.matches(&grid));
        assert!(!table.matches(&build_time_grid(&[2, 4]).unwrap()));
    }
}
