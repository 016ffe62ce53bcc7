//! Empirical Rademacher complexity of a one-parameter family, given the
//! dual functions `r ↦ f_r(x_i)` of the sampled instances.
//!
//! Because every dual is piecewise constant, the supremum over `r` is a
//! maximum over the finitely many value vectors taken on the common
//! refinement of all duals; the complexity is then an average over sign
//! vectors of `max_a σ·a`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseConstant;

/// Duals `f*_{x_1}, …, f*_{x_N}` on a shared domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSample {
    duals: Vec<PiecewiseConstant>,
}

impl DualSample {
    pub fn new(duals: Vec<PiecewiseConstant>) -> Result<Self> {
        let first = duals
            .first()
            .ok_or_else(|| Error::argument("a dual sample needs at least one dual"))?;
        if let Some((i, d)) = duals
            .iter()
            .enumerate()
            .find(|(_, d)| !d.same_domain(first))
        {
            return Err(Error::domain(format!(
                "dual {i} has domain [{}, {}), expected [{}, {})",
                d.lo(),
                d.hi(),
                first.lo(),
                first.hi()
            )));
        }
        Ok(DualSample { duals })
    }

    pub fn len(&self) -> usize {
        self.duals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duals.is_empty()
    }

    pub fn duals(&self) -> &[PiecewiseConstant] {
        &self.duals
    }

    pub fn max_pieces(&self) -> usize {
        self.duals
            .iter()
            .map(PiecewiseConstant::num_pieces)
            .max()
            .unwrap_or(0)
    }
}

/// Distinct vectors `(f*_{x_1}(r), …, f*_{x_N}(r))` as `r` ranges over the
/// domain, sorted lexicographically.
pub fn distinct_vectors(sample: &DualSample) -> Vec<Vec<f64>> {
    let duals = sample.duals();
    let mut cuts: Vec<f64> = duals
        .iter()
        .flat_map(|d| d.breaks()[..d.breaks().len() - 1].iter().copied())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // Sweep: advance each dual's segment cursor as the refined segments go by.
    let mut cursor = vec![0usize; duals.len()];
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(cuts.len());
    for &start in &cuts {
        let v = duals
            .iter()
            .zip(cursor.iter_mut())
            .map(|(d, c)| {
                while d.breaks()[*c + 1] <= start {
                    *c += 1;
                }
                d.values()[*c]
            })
            .collect();
        vectors.push(v);
    }
    vectors.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    vectors.dedup();
    vectors
}

/// Largest sample size for exhaustive sign enumeration.
pub const EXACT_MAX_N: usize = 20;

/// `max_{a∈A} σ·a` with `σ_i = +1` iff bit `i` of `signs` is set.
#[inline]
fn best_correlation(vectors: &[Vec<f64>], signs: u64) -> f64 {
    vectors
        .iter()
        .map(|a| {
            a.iter()
                .enumerate()
                .map(|(i, &v)| if signs >> i & 1 == 1 { v } else { -v })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Empirical Rademacher complexity of an explicit finite vector set,
/// by enumerating all `2^N` sign vectors.
pub fn vector_set_rad_exact(vectors: &[Vec<f64>], n: usize) -> Result<f64> {
    if n == 0 || n > EXACT_MAX_N {
        return Err(Error::Resource(format!(
            "exact enumeration supports 1..={EXACT_MAX_N} instances, got {n}"
        )));
    }
    if vectors.is_empty() || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::argument(
            "vector set must be nonempty with length-N vectors",
        ));
    }
    // Pairing σ with -σ makes every partial sum nonnegative in floating
    // point: σ·a and (-σ)·a cancel exactly.
    let mask = (1u64 << n) - 1;
    let total: f64 = (0..1u64 << (n - 1))
        .map(|s| best_correlation(vectors, s) + best_correlation(vectors, s ^ mask))
        .sum();
    Ok(total / (n as f64 * (1u64 << n) as f64))
}

pub fn empirical_rad_exact(sample: &DualSample) -> Result<f64> {
    let n = sample.len();
    if n > EXACT_MAX_N {
        return Err(Error::Resource(format!(
            "exact enumeration supports N <= {EXACT_MAX_N}, got {n}; use the Monte-Carlo estimator"
        )));
    }
    vector_set_rad_exact(&distinct_vectors(sample), n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Standard error of the mean; infinite for a single draw.
    pub stderr: f64,
}

/// Draws per RNG stream. Each block uses stream `b` of the root seed, so
/// the estimate does not depend on how blocks are scheduled.
const MC_BLOCK: u64 = 4096;

pub fn empirical_rad_mc(sample: &DualSample, draws: u64, seed: u64) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::argument("draws must be >= 1"));
    }
    let n = sample.len();
    let vectors = distinct_vectors(sample);
    let blocks = draws.div_ceil(MC_BLOCK);

    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = MC_BLOCK.min(draws - b * MC_BLOCK);
            let mut signs = vec![false; n];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let mut bits = 0u64;
                for (i, s) in signs.iter_mut().enumerate() {
                    if i % 64 == 0 {
                        bits = rng.gen();
                    }
                    *s = bits >> (i % 64) & 1 == 1;
                }
                let best = vectors
                    .iter()
                    .map(|a| {
                        a.iter()
                            .zip(&signs)
                            .map(|(&v, &pos)| if pos { v } else { -v })
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
                    / n as f64;
                sum += best;
                sum_sq += best * best;
            }
            (sum, sum_sq)
        })
        .collect();

    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(s, q), &(bs, bq)| (s + bs, q + bq));
    let m = draws as f64;
    let mean = sum / m;
    let stderr = if draws > 1 {
        let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate {
        estimate: mean,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{massart_bound, pwc_rad_bound};
    use crate::piecewise::linf_distance;
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform(values: &[f64]) -> PiecewiseConstant {
        PiecewiseConstant::uniform(0.0, 1.0, values).unwrap()
    }

    #[test]
    fn constant_duals_collapse_to_one_vector() {
        let s =
            DualSample::new(vec![PiecewiseConstant::constant(0.0, 1.0, 0.5).unwrap(); 3]).unwrap();
        assert_eq!(distinct_vectors(&s), vec![vec![0.5, 0.5, 0.5]]);
        assert_eq!(empirical_rad_exact(&s).unwrap(), 0.0);
    }

    #[test]
    fn repeated_values_are_deduplicated() {
        let s = DualSample::new(vec![uniform(&[0.0, 1.0, 0.0, 1.0])]).unwrap();
        assert_eq!(distinct_vectors(&s).len(), 2);
    }

    #[test]
    fn generic_breakpoints_count() {
        let a = PiecewiseConstant::new(vec![0.0, 0.2, 0.6, 1.0], vec![0.1, 0.5, 0.9]).unwrap();
        let b = PiecewiseConstant::new(vec![0.0, 0.3, 0.8, 1.0], vec![0.2, 0.4, 0.6]).unwrap();
        let s = DualSample::new(vec![a, b]).unwrap();
        let vs = distinct_vectors(&s);
        assert_eq!(vs.len(), 5);
        assert!(vs.len() <= 2 * (3 - 1) + 1);
    }

    #[test]
    fn two_point_shattering_construction() {
        // Four regions; x1 takes (1,1,0,0), x2 takes (1,0,1,0).
        let x1 = uniform(&[1.0, 1.0, 0.0, 0.0]);
        let x2 = uniform(&[1.0, 0.0, 1.0, 0.0]);
        let s = DualSample::new(vec![x1, x2]).unwrap();
        assert_eq!(empirical_rad_exact(&s).unwrap(), 0.5);
    }

    #[test]
    fn sample_validation() {
        assert!(DualSample::new(vec![]).is_err());
        let a = PiecewiseConstant::constant(0.0, 1.0, 0.5).unwrap();
        let b = PiecewiseConstant::constant(0.0, 2.0, 0.5).unwrap();
        assert!(matches!(DualSample::new(vec![a, b]), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_refuses_large_samples() {
        let s = DualSample::new(vec![
            PiecewiseConstant::constant(0.0, 1.0, 0.5).unwrap();
            21
        ])
        .unwrap();
        assert!(matches!(empirical_rad_exact(&s), Err(Error::Resource(_))));
    }

    fn random_sample(n: usize, j: usize, seed: u64) -> DualSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let duals = (0..n)
            .map(|_| {
                let pieces = rng.gen_range(1..=j);
                let mut cuts: Vec<f64> =
                    (0..pieces - 1).map(|_| rng.gen_range(0.01..0.99)).collect();
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut breaks = vec![0.0];
                breaks.extend(cuts);
                breaks.push(1.0);
                let values = (0..breaks.len() - 1).map(|_| rng.gen::<f64>()).collect();
                PiecewiseConstant::new(breaks, values).unwrap()
            })
            .collect();
        DualSample::new(duals).unwrap()
    }

    #[test]
    fn monte_carlo_converges_to_exact() {
        let s = random_sample(10, 4, 11);
        let exact = empirical_rad_exact(&s).unwrap();
        let mc = empirical_rad_mc(&s, 100_000, 5).unwrap();
        assert!(
            (mc.estimate - exact).abs() <= 3.0 * mc.stderr,
            "exact {exact}, mc {mc:?}"
        );
    }

    #[test]
    fn monte_carlo_constant_duals() {
        let s =
            DualSample::new(vec![PiecewiseConstant::constant(0.0, 1.0, 0.3).unwrap(); 6]).unwrap();
        let small = empirical_rad_mc(&s, 1_000, 1).unwrap();
        let large = empirical_rad_mc(&s, 100_000, 1).unwrap();
        assert!(small.estimate.abs() < 4.0 * small.stderr);
        assert!(large.estimate.abs() < 4.0 * large.stderr);
        assert!(large.stderr < small.stderr);
    }

    #[test]
    fn monte_carlo_is_deterministic_across_pools() {
        let s = random_sample(30, 5, 3);
        let a = empirical_rad_mc(&s, 20_000, 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| empirical_rad_mc(&s, 20_000, 99).unwrap());
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert!(empirical_rad_mc(&s, 0, 1).is_err());
        assert!(empirical_rad_mc(&s, 1, 1).unwrap().stderr.is_infinite());
    }

    #[test]
    fn four_random_duals_below_massart() {
        for seed in 0..20 {
            let s = random_sample(4, 3, seed);
            let a = distinct_vectors(&s);
            let r = empirical_rad_exact(&s).unwrap();
            assert!(r <= massart_bound(a.len() as u64, 4) + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn complexity_in_unit_interval_and_below_massart(n in 1usize..=8, j in 1usize..=5, seed in any::<u64>()) {
            let s = random_sample(n, j, seed);
            let a = distinct_vectors(&s);
            prop_assert!(a.len() <= n * (s.max_pieces() - 1) + 1);
            let r = empirical_rad_exact(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(r <= massart_bound(a.len() as u64, n as u64) + 1e-12);
            prop_assert!(r <= pwc_rad_bound(n as u64, s.max_pieces() as u64) + 1e-12);
        }

        #[test]
        fn complement_symmetric_family_at_most_half(n in 1usize..=6, seed in any::<u64>()) {
            // Adding 1 - f for every vector makes the family symmetric.
            let s = random_sample(n, 3, seed);
            let mut a = distinct_vectors(&s);
            let comp: Vec<Vec<f64>> = a.iter().map(|v| v.iter().map(|x| 1.0 - x).collect()).collect();
            a.extend(comp);
            let r = vector_set_rad_exact(&a, n).unwrap();
            prop_assert!(r <= 0.5 + 1e-12);
        }

        #[test]
        fn approximation_transfer_inequality(n in 1usize..=8, seed in any::<u64>()) {
            let f = random_sample(n, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let g = DualSample::new(f.duals().iter().map(|d| {
                let k = rng.gen_range(1..=d.num_pieces());
                crate::dpfit::fit(d, k).unwrap().approximant
            }).collect()).unwrap();
            let slack: f64 = f.duals().iter().zip(g.duals())
                .map(|(a, b)| linf_distance(a, b).unwrap()).sum::<f64>() / n as f64;
            let rf = empirical_rad_exact(&f).unwrap();
            let rg = empirical_rad_exact(&g).unwrap();
            prop_assert!(rf <= rg + slack + 1e-12, "{} > {} + {}", rf, rg, slack);
        }

        #[test]
        fn duplicating_a_dual_respects_count(n in 1usize..=6, seed in any::<u64>()) {
            let s = random_sample(n, 4, seed);
            let base = distinct_vectors(&s).len();
            let mut duals = s.duals().to_vec();
            duals.push(duals[0].clone());
            let bigger = DualSample::new(duals).unwrap();
            let a = distinct_vectors(&bigger);
            prop_assert_eq!(a.len(), base);
            prop_assert!(a.len() <= (n + 1) * (bigger.max_pieces() - 1) + 1);
        }
    }
}
