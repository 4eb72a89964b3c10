//! Merged-grid structure against brute-force set oracles, and the
//! semigroup-product bounds that the error analysis leans on.

use num_rational::Ratio;
use proptest::prelude::*;

use sphere_heat::harmonics::mu;
use sphere_heat::timegrid::{build_time_grid, GammaEvaluator, Time};

fn counts() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..=12, 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merged_grid_matches_set_oracle(n in counts()) {
        let g = build_time_grid(&n).unwrap();

        // Oracle: the union of all per-degree node sets, built separately.
        let mut expect = std::collections::BTreeSet::new();
        for &count in &n {
            for j in 0..=count {
                expect.insert(Ratio::new(j as i64, count as i64));
            }
        }
        let expect: Vec<Time> = expect.into_iter().collect();
        prop_assert_eq!(g.tau(), &expect[..]);

        // Membership and lookback against linear scans of the node sets.
        for k in 0..=g.num_steps() {
            let t = g.tau()[k];
            for (ell, &count) in n.iter().enumerate() {
                let nodes: Vec<Time> = (0..=count)
                    .map(|j| Ratio::new(j as i64, count as i64))
                    .collect();
                let is_member = nodes.contains(&t);
                prop_assert_eq!(g.members(k).contains(&ell), is_member);
                if k >= 1 {
                    let s_oracle = *nodes.iter().filter(|&&s| s < t).max().unwrap();
                    prop_assert_eq!(g.lookback_time(k, ell), s_oracle);
                    if is_member {
                        prop_assert_eq!(t - s_oracle, Ratio::new(1, count as i64));
                    }
                }
            }
        }

        // Endpoints belong to every grid.
        prop_assert_eq!(g.members(0).len(), n.len());
        prop_assert_eq!(g.members(g.num_steps()).len(), n.len());
    }

    #[test]
    fn ratio_matches_value_quotient_when_representable(
        n in counts(),
        ell in 0usize..=20,
        lo_num in 0u32..100,
        hi_num in 0u32..100,
    ) {
        let g = build_time_grid(&n).unwrap();
        let eval = GammaEvaluator::<f64>::new(&g, 20);
        let (a, b) = (lo_num.min(hi_num) as f64 / 100.0, lo_num.max(hi_num) as f64 / 100.0);
        let v_hi = eval.gamma(ell, b);
        let v_lo = eval.gamma(ell, a);
        // Quotient oracle is meaningful only while the values carry full
        // precision themselves.
        prop_assume!(v_hi > 1e-280);
        let direct = eval.gamma_ratio(ell, b, a);
        let quotient = v_hi / v_lo;
        prop_assert!(
            (direct - quotient).abs() <= 1e-12 * quotient.abs().max(1e-300),
            "ell={ell}: product {direct} vs quotient {quotient}"
        );
    }

    #[test]
    fn ratio_deviation_bounded(
        n in counts(),
        ell in 0usize..=30,
        lo in 0.0_f64..1.0,
        hi in 0.0_f64..1.0,
    ) {
        let g = build_time_grid(&n).unwrap();
        let eval = GammaEvaluator::<f64>::new(&g, 30);
        let (s, t) = (lo.min(hi), lo.max(hi));
        let ratio = eval.gamma_ratio(ell, t, s);
        let bound = (mu::<f64>(ell) * (t - s)).min(1.0);
        prop_assert!(ratio <= 1.0 + 1e-15, "ratio exceeds one: {ratio}");
        prop_assert!(
            (1.0 - ratio).abs() <= bound + 1e-14,
            "ell={ell}, s={s}, t={t}: |1-ratio|={} > {bound}",
            (1.0 - ratio).abs()
        );
    }
}

#[test]
fn squared_ratio_integral_bounded() {
    // ∫_{t_j}^1 (Γ_ℓ(t)/Γ_ℓ(t_j))² dt ≤ 2/μ_ℓ at every breakpoint, by
    // trapezoid quadrature on each merged segment. The integrand is convex
    // within segments, so the trapezoid value over-estimates: passing here
    // is conservative.
    for n in [vec![3u64, 7], vec![16, 16], vec![2, 5, 9], vec![1, 13]] {
        let g = build_time_grid(&n).unwrap();
        let eval = GammaEvaluator::<f64>::new(&g, 24);
        let taus: Vec<f64> = (0..=g.num_steps()).map(|k| g.tau_at(k)).collect();
        for ell in 1usize..=24 {
            for (j, &t_j) in taus.iter().enumerate() {
                let mut integral = 0.0;
                for seg in j..g.num_steps() {
                    let (a, b) = (taus[seg], taus[seg + 1]);
                    let steps = 200;
                    let h = (b - a) / steps as f64;
                    for i in 0..steps {
                        let t0 = a + i as f64 * h;
                        let r0 = eval.gamma_ratio(ell, t0, t_j);
                        let r1 = eval.gamma_ratio(ell, t0 + h, t_j);
                        integral += 0.5 * h * (r0 * r0 + r1 * r1);
                    }
                }
                let bound = 2.0 / mu::<f64>(ell);
                assert!(
                    integral <= bound * (1.0 + 1e-10),
                    "n={n:?} ell={ell} j={j}: {integral} > {bound}"
                );
            }
        }
    }
}

#[test]
fn gamma_approaches_exponential_under_refinement() {
    // Γ_ℓ is the backward-Euler resolvent product; its sup-distance to
    // e^{−μ_ℓ t} is O(1/n) on a uniform n-grid, so doubling n halves the
    // error up to the next-order 1 + O(μ_ℓ/n) factor (the ratio approaches
    // 1/2 from above, so exact halving never holds at any finite n).
    let samples: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    for ell in 1usize..=10 {
        let m: f64 = mu(ell);
        let mut previous: Option<f64> = None;
        for n in [1024u64, 2048, 4096] {
            let g = build_time_grid(&[n]).unwrap();
            let eval = GammaEvaluator::<f64>::new(&g, ell);
            let err = samples
                .iter()
                .map(|&t| (eval.gamma(ell, t) - (-m * t).exp()).abs())
                .fold(0.0_f64, f64::max);
            if let Some(prev) = previous {
                assert!(
                    err <= 0.5 * prev * (1.0 + m / n as f64),
                    "ell={ell} n={n}: error {err} vs previous {prev}"
                );
            }
            previous = Some(err);
        }
    }
}
