//! Non-uniform time grids and the semigroup product approximation Γ_ℓ.
//!
//! Each noise degree ℓ' gets its own uniform grid t_{j,ℓ'} = j/n_ℓ' on
//! [0,1]. The scheme runs on the merged breakpoint sequence
//! τ_0 = 0 < τ_1 < ... < τ_K = 1, the union of all per-degree nodes.
//! Node arithmetic is exact rational (`Ratio<i64>`): ties like 1/2 = 2/4
//! merge exactly, membership is a divisibility test, and lookbacks are
//! integer division. Floats appear only at evaluation time.
//!
//! The backward-Euler semigroup approximation is
//!
//! ```text
//! Γ_ℓ(t) = Π_ν 1 / (1 + μ_ℓ (t∧τ_ν − t∧τ_{ν−1}))        μ_ℓ = ℓ(ℓ+1)
//! ```
//!
//! Ratios Γ_ℓ(t)/Γ_ℓ(s) are always computed as products over the segments
//! inside (s, t]; the values themselves underflow for large μ_ℓ·t while
//! every ratio the scheme needs is well-scaled.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::harmonics::mu;
use crate::real::Real;

/// Exact rational time in [0, 1].
pub type Time = Ratio<i64>;

/// Merged multi-rate time grid over the unit interval.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    /// Step count n_ℓ' per degree, index ℓ' = 0..=Λ.
    n: Vec<u64>,
    /// Merged breakpoints τ_0 = 0 < ... < τ_K = 1.
    tau: Vec<Time>,
    /// members[k]: degrees ℓ' whose grid contains τ_k, ascending.
    members: Vec<Vec<usize>>,
    /// lookback[k−1][ℓ']: breakpoint index of s_{k,ℓ'}, the last node of
    /// grid ℓ' strictly below τ_k (defined for k ≥ 1).
    lookback: Vec<Vec<usize>>,
}

/// Builds the merged grid for per-degree step counts `n` (index = degree).
pub fn build_time_grid(n: &[u64]) -> Result<TimeGrid> {
    if n.is_empty() {
        return Err(Error::Invalid("step-count array is empty".into()));
    }
    if n.iter().any(|&count| count == 0) {
        return Err(Error::Invalid("step counts must be positive".into()));
    }
    let mut set = std::collections::BTreeSet::new();
    for &count in n {
        let denom = i64::try_from(count)
            .map_err(|_| Error::Invalid(format!("step count {count} too large")))?;
        for j in 0..=denom {
            set.insert(Ratio::new(j, denom));
        }
    }
    let tau: Vec<Time> = set.into_iter().collect();

    // τ_k = p/q in lowest terms is a node of grid ℓ' iff q divides n_ℓ'.
    let members: Vec<Vec<usize>> = tau
        .iter()
        .map(|t| {
            let q = *t.denom() as u64;
            n.iter()
                .enumerate()
                .filter(|(_, &count)| count % q == 0)
                .map(|(ell, _)| ell)
                .collect()
        })
        .collect();

    // s_{k,ℓ'} = j_max/n_ℓ' with j_max = ⌊(p·n_ℓ' − 1)/q⌋, the largest
    // node index with j/n < p/q.
    let mut lookback = Vec::with_capacity(tau.len() - 1);
    for t in &tau[1..] {
        let (p, q) = (*t.numer(), *t.denom());
        let row: Vec<usize> = n
            .iter()
            .map(|&count| {
                let nc = count as i64;
                let j_max = (p * nc - 1).div_euclid(q);
                let s = Ratio::new(j_max, nc);
                tau.binary_search(&s).expect("lookback node is a breakpoint")
            })
            .collect();
        lookback.push(row);
    }

    Ok(TimeGrid {
        n: n.to_vec(),
        tau,
        members,
        lookback,
    })
}

impl TimeGrid {
    /// Highest degree with its own grid (Λ).
    pub fn lambda(&self) -> usize {
        self.n.len() - 1
    }

    /// Per-degree step counts.
    pub fn step_counts(&self) -> &[u64] {
        &self.n
    }

    /// Merged breakpoints, τ_0 = 0 through τ_K = 1.
    pub fn tau(&self) -> &[Time] {
        &self.tau
    }

    /// Number of merged steps K.
    pub fn num_steps(&self) -> usize {
        self.tau.len() - 1
    }

    /// Breakpoint as a float.
    pub fn tau_at<R: Real>(&self, k: usize) -> R {
        ratio_to_real(self.tau[k])
    }

    /// Degrees whose grid contains τ_k.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    /// Breakpoint index of s_{k,ℓ'} for k ≥ 1.
    pub fn lookback_index(&self, k: usize, ell_prime: usize) -> usize {
        assert!(k >= 1, "lookback defined for k >= 1");
        self.lookback[k - 1][ell_prime]
    }

    /// s_{k,ℓ'} as an exact rational.
    pub fn lookback_time(&self, k: usize, ell_prime: usize) -> Time {
        self.tau[self.lookback_index(k, ell_prime)]
    }

    /// Node index j with τ_k = j/n_ℓ', if τ_k lies on grid ℓ'.
    pub fn node_index(&self, k: usize, ell_prime: usize) -> Option<u64> {
        let t = self.tau[k];
        let n = self.n[ell_prime];
        if n % (*t.denom() as u64) == 0 {
            Some(*t.numer() as u64 * (n / *t.denom() as u64))
        } else {
            None
        }
    }

    /// Index of an exact breakpoint value.
    pub fn index_of(&self, t: Time) -> Option<usize> {
        self.tau.binary_search(&t).ok()
    }
}

pub(crate) fn ratio_to_real<R: Real>(t: Time) -> R {
    R::of(*t.numer() as f64) / R::of(*t.denom() as f64)
}

/// Precomputed Γ_ℓ machinery for all degrees 0..=l_max on one grid.
#[derive(Clone, Debug)]
pub struct GammaEvaluator<R> {
    tau: Vec<R>,
    /// factors[ℓ][ν−1] = 1/(1 + μ_ℓ Δ_ν) for merged segment ν = 1..=K.
    factors: Vec<Vec<R>>,
    /// values[ℓ][k] = Γ_ℓ(τ_k); may underflow to zero for large μ_ℓ τ_k.
    values: Vec<Vec<R>>,
}

impl<R: Real> GammaEvaluator<R> {
    pub fn new(grid: &TimeGrid, l_max: usize) -> Self {
        let tau: Vec<R> = (0..grid.tau().len()).map(|k| grid.tau_at(k)).collect();
        let deltas: Vec<R> = grid
            .tau()
            .windows(2)
            .map(|w| ratio_to_real(w[1] - w[0]))
            .collect();
        let mut factors = Vec::with_capacity(l_max + 1);
        let mut values = Vec::with_capacity(l_max + 1);
        for ell in 0..=l_max {
            let m: R = mu(ell);
            let f: Vec<R> = deltas.iter().map(|&d| (R::one() + m * d).recip()).collect();
            let mut v = Vec::with_capacity(f.len() + 1);
            let mut acc = R::one();
            v.push(acc);
            for &factor in &f {
                acc = acc * factor;
                v.push(acc);
            }
            factors.push(f);
            values.push(v);
        }
        GammaEvaluator {
            tau,
            factors,
            values,
        }
    }

    pub fn l_max(&self) -> usize {
        self.factors.len() - 1
    }

    /// Γ_ℓ(τ_k) from the breakpoint cache.
    pub fn value_at(&self, ell: usize, k: usize) -> R {
        self.values[ell][k]
    }

    /// Γ_ℓ(t) for any t ∈ [0,1]: cached prefix times the partial final
    /// factor 1/(1 + μ_ℓ (t − τ_{ν−1})).
    pub fn gamma(&self, ell: usize, t: R) -> R {
        let seg = self.segment_of(t);
        match seg {
            None => self.values[ell][0],
            Some(nu) => {
                let partial = (R::one() + mu::<R>(ell) * (t - self.tau[nu - 1])).recip();
                self.values[ell][nu - 1] * partial
            }
        }
    }

    /// Γ_ℓ(τ_hi)/Γ_ℓ(τ_lo) as a product of the cached per-segment factors,
    /// indexed by breakpoints.
    pub fn ratio_between(&self, ell: usize, k_lo: usize, k_hi: usize) -> R {
        debug_assert!(k_lo <= k_hi);
        self.factors[ell][k_lo..k_hi]
            .iter()
            .fold(R::one(), |acc, &f| acc * f)
    }

    /// Γ_ℓ(t_hi)/Γ_ℓ(t_lo) for arbitrary 0 ≤ t_lo ≤ t_hi ≤ 1, as a product
    /// over the segments intersecting (t_lo, t_hi]. Partial segments keep
    /// the anchored form (1 + μ(a − τ_{ν−1}))/(1 + μ(b − τ_{ν−1})): Γ is a
    /// product anchored at segment starts, not an exponential.
    pub fn gamma_ratio(&self, ell: usize, t_hi: R, t_lo: R) -> R {
        debug_assert!(R::zero() <= t_lo && t_lo <= t_hi);
        if t_lo == t_hi {
            return R::one();
        }
        let m: R = mu(ell);
        let mut ratio = R::one();
        for nu in 1..self.tau.len() {
            let seg_lo = self.tau[nu - 1];
            let seg_hi = self.tau[nu];
            if seg_hi <= t_lo {
                continue;
            }
            if seg_lo >= t_hi {
                break;
            }
            let numer = if t_lo > seg_lo {
                R::one() + m * (t_lo - seg_lo)
            } else {
                R::one()
            };
            let denom = R::one() + m * (t_hi.min(seg_hi) - seg_lo);
            ratio = ratio * numer / denom;
        }
        ratio
    }

    /// Index ν ≥ 1 with t ∈ (τ_{ν−1}, τ_ν], or None for t ≤ 0.
    fn segment_of(&self, t: R) -> Option<usize> {
        if t <= R::zero() {
            return None;
        }
        let nu = self.tau.partition_point(|&tau_nu| tau_nu < t);
        Some(nu.min(self.tau.len() - 1))
    }
}

/// Rule assigning a step count to every noise degree 0..=Λ.
#[derive(Clone, Debug, PartialEq)]
pub enum StepAllocation {
    /// Same n for every degree.
    Uniform { n: u64 },
    /// n_ℓ' = max(1, ⌈√A_ℓ' · N^δ⌉): more steps for louder degrees.
    SqrtSpectrum { scale: u64, delta: f64 },
}

impl StepAllocation {
    /// Resolves the rule against a spectrum, producing step counts for
    /// degrees 0..=lambda. `a` is the angular power spectrum (zero-padded
    /// beyond its length).
    pub fn step_counts<R: Real>(&self, a: &[R], lambda: usize) -> Vec<u64> {
        match *self {
            StepAllocation::Uniform { n } => vec![n.max(1); lambda + 1],
            StepAllocation::SqrtSpectrum { scale, delta } => (0..=lambda)
                .map(|ell| {
                    let a_ell = a.get(ell).copied().unwrap_or_else(R::zero).as_f64();
                    let raw = a_ell.sqrt() * (scale as f64).powf(delta);
                    (raw.ceil() as u64).max(1)
                })
                .collect(),
        }
    }
}

impl std::str::FromStr for StepAllocation {
    type Err = Error;

    /// Parses `uniform:n`, `sqrtA:N`, or `sqrtA:N,delta` (δ defaults to 1).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            context: format!("allocation rule '{s}'"),
            message: msg.into(),
        };
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected 'rule:args'"))?;
        match kind {
            "uniform" => {
                let n: u64 = args.parse().map_err(|_| bad("step count must be a positive integer"))?;
                if n == 0 {
                    return Err(bad("step count must be positive"));
                }
                Ok(StepAllocation::Uniform { n })
            }
            "sqrtA" => {
                let (scale_str, delta) = match args.split_once(',') {
                    Some((n, d)) => (
                        n,
                        d.parse::<f64>().map_err(|_| bad("delta must be a number"))?,
                    ),
                    None => (args, 1.0),
                };
                let scale: u64 = scale_str
                    .parse()
                    .map_err(|_| bad("scale must be a positive integer"))?;
                if scale == 0 {
                    return Err(bad("scale must be positive"));
                }
                if !delta.is_finite() || delta < 0.0 {
                    return Err(bad("delta must be finite and non-negative"));
                }
                Ok(StepAllocation::SqrtSpectrum { scale, delta })
            }
            other => Err(bad(&format!("unknown rule '{other}'"))),
        }
    }
}

impl std::fmt::Display for StepAllocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepAllocation::Uniform { n } => write!(f, "uniform:{n}"),
            StepAllocation::SqrtSpectrum { scale, delta } => write!(f, "sqrtA:{scale},{delta}"),
        }
    }
}
