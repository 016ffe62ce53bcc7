//! Optimal k-piece L∞ approximation of a piecewise-constant function.
//!
//! Given segment values `c_1..c_t`, the cost `C(i, j)` of the best
//! `j`-block fit of the prefix `c_1..c_i` satisfies
//!
//! ```text
//! C(i, 1) = (u_{1,i} - l_{1,i}) / 2
//! C(i, j) = min { C(i, 1), min_{i' < i} combine(C(i', j-1), (u_{i'+1,i} - l_{i'+1,i}) / 2) }
//! ```
//!
//! where `u`/`l` are range maxima/minima. With `combine = max` the value
//! `C(t, k)` is exactly `min_g ‖f - g‖∞` over functions with at most `k`
//! pieces; [`Combine::Sum`] keeps the additive surrogate for comparison.
//! Table construction is O(t²) and the recurrence O(k t²).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseConstant;

/// Running maxima and minima over every contiguous range of segment values.
///
/// Stored as a triangle keyed by the range's last index so that the inner
/// loop of the recurrence reads one contiguous row.
#[derive(Debug, Clone)]
pub struct RangeTables {
    t: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl RangeTables {
    #[inline]
    fn offset(end: usize) -> usize {
        end * (end + 1) / 2
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// `max(c[start..=end])`, zero-based and inclusive.
    pub fn upper(&self, start: usize, end: usize) -> f64 {
        assert!(start <= end && end < self.t);
        self.upper[Self::offset(end) + start]
    }

    /// `min(c[start..=end])`, zero-based and inclusive.
    pub fn lower(&self, start: usize, end: usize) -> f64 {
        assert!(start <= end && end < self.t);
        self.lower[Self::offset(end) + start]
    }

    /// Rows `(upper, lower)` for all ranges ending at `end`, indexed by start.
    fn row(&self, end: usize) -> (&[f64], &[f64]) {
        let o = Self::offset(end);
        (&self.upper[o..=o + end], &self.lower[o..=o + end])
    }
}

pub fn range_tables(values: &[f64]) -> Result<RangeTables> {
    let t = values.len();
    if t == 0 {
        return Err(Error::argument("range tables need at least one value"));
    }
    let size = RangeTables::offset(t);
    let mut upper = vec![0.0; size];
    let mut lower = vec![0.0; size];
    for end in 0..t {
        let o = RangeTables::offset(end);
        let (mut hi, mut lo) = (values[end], values[end]);
        for start in (0..=end).rev() {
            let c = values[start];
            if c > hi {
                hi = c;
            } else if c < lo {
                lo = c;
            }
            upper[o + start] = hi;
            lower[o + start] = lo;
        }
    }
    Ok(RangeTables { t, upper, lower })
}

/// Value fitted to a block whose values span `[lo, hi]`.
#[inline]
fn block_value(hi: f64, lo: f64) -> f64 {
    0.5 * (hi + lo)
}

/// Worst deviation from the block midpoint, i.e. `(hi - lo) / 2` evaluated so
/// that it matches the L∞ distance to the fitted value bit for bit.
#[inline]
pub fn block_error(hi: f64, lo: f64) -> f64 {
    let mid = block_value(hi, lo);
    (hi - mid).max(mid - lo)
}

/// How block costs are combined in the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// Worst block; yields the exact L∞ optimum.
    #[default]
    Max,
    /// Sum of block costs, an upper bound on the L∞ optimum.
    Sum,
}

impl Combine {
    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combine::Max => a.max(b),
            Combine::Sum => a + b,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    pub combine: Combine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// `C(t, k)`.
    pub error: f64,
    #[serde(flatten)]
    pub approximant: PiecewiseConstant,
    /// Zero-based index of the first input segment of every block after the
    /// first, i.e. a block boundary sits right after `splits[b]` segments.
    pub splits: Vec<usize>,
}

/// Full DP state: `cost[j-1][i]` and the chosen split (start of the last
/// block) for every prefix end `i` and piece budget `j`.
struct Table {
    cost: Vec<Vec<f64>>,
    split: Vec<Vec<Option<usize>>>,
}

fn run_dp(tables: &RangeTables, k: usize, combine: Combine) -> Table {
    let t = tables.len();
    let mut cost = Vec::with_capacity(k);
    let mut split = Vec::with_capacity(k);

    let base: Vec<f64> = (0..t)
        .map(|i| block_error(tables.upper(0, i), tables.lower(0, i)))
        .collect();
    cost.push(base);
    split.push(vec![None; t]);

    for j in 1..k {
        let prev = &cost[j - 1];
        let mut row_cost = Vec::with_capacity(t);
        let mut row_split = Vec::with_capacity(t);
        for (i, &single) in cost[0].iter().enumerate() {
            let (up, lo) = tables.row(i);
            let mut best = single;
            let mut arg = None;
            // `start` is the first segment of the last block.
            for start in 1..=i {
                let cand = combine.apply(prev[start - 1], block_error(up[start], lo[start]));
                if cand < best {
                    best = cand;
                    arg = Some(start);
                }
            }
            row_cost.push(best);
            row_split.push(arg);
        }
        cost.push(row_cost);
        split.push(row_split);
    }
    Table { cost, split }
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::argument("number of pieces k must be >= 1"));
    }
    Ok(())
}

pub fn fit(f: &PiecewiseConstant, k: usize) -> Result<FitResult> {
    fit_with(f, k, FitOptions::default())
}

pub fn fit_with(f: &PiecewiseConstant, k: usize, opts: FitOptions) -> Result<FitResult> {
    check_k(k)?;
    let values = f.values();
    let t = values.len();
    let k = k.min(t);
    let tables = range_tables(values)?;
    let dp = run_dp(&tables, k, opts.combine);

    // Walk the split pointers back from (t-1, k).
    let mut starts = Vec::new();
    let (mut end, mut j) = (t - 1, k - 1);
    while let Some(start) = dp.split[j][end] {
        starts.push(start);
        end = start - 1;
        j -= 1;
    }
    starts.reverse();

    let mut breaks = vec![f.lo()];
    let mut fitted = Vec::with_capacity(starts.len() + 1);
    let mut block_start = 0;
    for &s in starts.iter().chain(std::iter::once(&t)) {
        let last = s - 1;
        fitted.push(block_value(
            tables.upper(block_start, last),
            tables.lower(block_start, last),
        ));
        breaks.push(f.breaks()[s]);
        block_start = s;
    }
    let approximant = PiecewiseConstant::new(breaks, fitted)?;

    Ok(FitResult {
        error: dp.cost[k - 1][t - 1],
        approximant,
        splits: starts,
    })
}

/// `C(t, j)` for every `j` in `1..=k_max`, from a single DP pass.
///
/// Budgets beyond the segment count repeat the (zero) error at `j = t`.
pub fn error_profile(f: &PiecewiseConstant, k_max: usize) -> Result<Vec<f64>> {
    check_k(k_max)?;
    let t = f.num_pieces();
    let k = k_max.min(t);
    let tables = range_tables(f.values())?;
    let dp = run_dp(&tables, k, Combine::Max);
    let mut out: Vec<f64> = dp.cost.iter().map(|row| row[t - 1]).collect();
    out.resize(k_max, *out.last().unwrap());
    Ok(out)
}

/// Largest segment count [`brute_force_fit`] accepts.
pub const BRUTE_FORCE_MAX_PIECES: usize = 20;

/// Exhaustive minimum over every placement of `k - 1` block boundaries.
///
/// Independent of the range tables and the recurrence; used as an oracle.
pub fn brute_force_fit(f: &PiecewiseConstant, k: usize) -> Result<f64> {
    check_k(k)?;
    let values = f.values();
    let t = values.len();
    if t > BRUTE_FORCE_MAX_PIECES {
        return Err(Error::Resource(format!(
            "brute force limited to {BRUTE_FORCE_MAX_PIECES} segments, got {t}"
        )));
    }
    let k = k.min(t);

    fn block(values: &[f64]) -> f64 {
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        block_error(hi, lo)
    }

    // Choose the starts of blocks 2..=k from 1..t, recursively.
    fn search(values: &[f64], start: usize, blocks_left: usize, worst: f64, best: &mut f64) {
        let t = values.len();
        if blocks_left == 1 {
            let e = worst.max(block(&values[start..]));
            if e < *best {
                *best = e;
            }
            return;
        }
        for next in start + 1..=t - (blocks_left - 1) {
            let e = worst.max(block(&values[start..next]));
            search(values, next, blocks_left - 1, e, best);
        }
    }

    let mut best = f64::INFINITY;
    search(values, 0, k, 0.0, &mut best);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::linf_distance;
    use proptest::prelude::*;

    fn uniform(values: &[f64]) -> PiecewiseConstant {
        PiecewiseConstant::uniform(0.0, 1.0, values).unwrap()
    }

    #[test]
    fn range_table_examples() {
        let t = range_tables(&[0.4]).unwrap();
        assert_eq!((t.upper(0, 0), t.lower(0, 0)), (0.4, 0.4));
        let t = range_tables(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!((t.upper(0, 2), t.lower(0, 2)), (1.0, 0.0));
        let vals = [0.2, 0.9, 0.5, 0.1];
        let t = range_tables(&vals).unwrap();
        // u_{2,4} and l_{2,4} in one-based notation.
        assert_eq!((t.upper(1, 3), t.lower(1, 3)), (0.9, 0.1));
        for s in 0..4 {
            for e in s..4 {
                let slice = &vals[s..=e];
                assert_eq!(
                    t.upper(s, e),
                    slice.iter().copied().fold(f64::MIN, f64::max)
                );
                assert_eq!(
                    t.lower(s, e),
                    slice.iter().copied().fold(f64::MAX, f64::min)
                );
            }
        }
        assert!(matches!(range_tables(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn fit_constant_function() {
        let f = PiecewiseConstant::constant(0.0, 1.0, 0.2).unwrap();
        for k in 1..4 {
            let r = fit(&f, k).unwrap();
            assert_eq!(r.error, 0.0);
            assert_eq!(r.approximant, f);
            assert!(r.splits.is_empty());
        }
    }

    #[test]
    fn fit_single_piece_of_spike() {
        let r = fit(&uniform(&[0.0, 1.0, 0.0]), 1).unwrap();
        assert_eq!(r.error, 0.5);
        assert_eq!(
            r.approximant,
            PiecewiseConstant::constant(0.0, 1.0, 0.5).unwrap()
        );
    }

    #[test]
    fn fit_two_pieces_frozen_by_enumeration() {
        // Enumerated by hand over the three split positions:
        // after 1 -> 0.4, after 2 -> 0.4, after 3 -> 0.3.
        let f = uniform(&[0.0, 0.6, 0.1, 0.9]);
        let r = fit(&f, 2).unwrap();
        assert!((r.error - 0.3).abs() < 1e-15);
        assert_eq!(r.splits, vec![3]);
        assert_eq!(r.approximant.breaks(), &[0.0, 0.75, 1.0]);
        assert_eq!(brute_force_fit(&f, 2).unwrap(), r.error);
    }

    #[test]
    fn fit_with_enough_pieces_is_exact() {
        let f = uniform(&[0.3, 0.1, 0.8, 0.5]);
        for k in 4..8 {
            let r = fit(&f, k).unwrap();
            assert_eq!(r.error, 0.0);
            assert_eq!(r.approximant, f);
        }
    }

    #[test]
    fn fit_rejects_zero_pieces() {
        let f = uniform(&[0.3, 0.1]);
        assert!(matches!(fit(&f, 0), Err(Error::Argument(_))));
        assert!(matches!(brute_force_fit(&f, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_fit(&uniform(&[0.0, 1.0]), 2).unwrap(), 0.0);
        assert_eq!(
            brute_force_fit(&uniform(&[0.0, 1.0, 0.0, 1.0]), 2).unwrap(),
            0.5
        );
        let big: Vec<f64> = (0..21).map(|i| (i % 2) as f64).collect();
        assert!(matches!(
            brute_force_fit(&uniform(&big), 3),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn sum_combination_bounds_max_combination() {
        let f = uniform(&[0.0, 0.6, 0.1, 0.9, 0.4, 0.45]);
        for k in 1..6 {
            let max = fit(&f, k).unwrap();
            let sum = fit_with(
                &f,
                k,
                FitOptions {
                    combine: Combine::Sum,
                },
            )
            .unwrap();
            assert!(sum.error >= max.error);
            // The approximant of the surrogate is still a valid k-piece fit.
            assert!(linf_distance(&f, &sum.approximant).unwrap() <= sum.error + 1e-15);
            assert!(sum.approximant.num_pieces() <= k);
        }
        let single = fit_with(
            &f,
            1,
            FitOptions {
                combine: Combine::Sum,
            },
        )
        .unwrap();
        assert_eq!(single.error, 0.45);
    }

    #[test]
    fn error_profile_matches_individual_fits() {
        let f = uniform(&[0.1, 0.7, 0.2, 0.9, 0.35]);
        let prof = error_profile(&f, 8).unwrap();
        assert_eq!(prof.len(), 8);
        for (j, e) in prof.iter().enumerate() {
            assert_eq!(*e, fit(&f, j + 1).unwrap().error);
        }
    }

    #[test]
    fn fit_result_json_has_error_field() {
        let r = fit(&uniform(&[0.0, 1.0, 0.0]), 1).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["error"], 0.5);
        assert_eq!(v["breaks"], serde_json::json!([0.0, 1.0]));
        let back: FitResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    fn arb_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..=12)
    }

    proptest! {
        #[test]
        fn dp_equals_brute_force(vals in arb_values(), k in 1usize..=5) {
            let f = uniform(&vals);
            prop_assert_eq!(fit(&f, k).unwrap().error, brute_force_fit(&f, k).unwrap());
        }

        #[test]
        fn approximant_realizes_error(vals in arb_values(), k in 1usize..=6) {
            let f = uniform(&vals);
            let r = fit(&f, k).unwrap();
            prop_assert_eq!(linf_distance(&f, &r.approximant).unwrap(), r.error);
            prop_assert!(r.approximant.num_pieces() <= k);
        }

        #[test]
        fn error_nonincreasing_in_k(vals in arb_values()) {
            let f = uniform(&vals);
            let prof = error_profile(&f, 14).unwrap();
            prop_assert!(prof.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(prof[f.num_pieces() - 1], 0.0);
        }

        #[test]
        fn single_piece_is_half_range(vals in arb_values()) {
            let f = uniform(&vals);
            let hi = f.values().iter().copied().fold(f64::MIN, f64::max);
            let lo = f.values().iter().copied().fold(f64::MAX, f64::min);
            let e = fit(&f, 1).unwrap().error;
            prop_assert!((e - (hi - lo) / 2.0).abs() <= 1e-16);
        }
    }
}
