//! Instances, dual extraction over the mixing parameter, κ selection and
//! approximation profiles.
//!
//! The dual of an instance is `r ↦ min(tree_size_r, κ)/κ` on `[0, 1)`, where
//! `tree_size_r` is the size of the branch-and-bound tree built with the
//! mixture `(1 - r)·score₁ + r·score₂`.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ApproxProfile;
use crate::dpfit::error_profile;
use crate::error::{Error, Result};
use crate::piecewise::PiecewiseConstant;
use crate::solver::{
    branch_and_bound_cached, BnbConfig, IntegerProgram, LpCache, NodePolicy, Row, RulePair,
};

/// Parameters of the synthetic winner-determination generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdpGenConfig {
    pub goods: usize,
    pub bids: usize,
    /// Bundle sizes are uniform on `bundle_min..=bundle_max`, capped at
    /// `goods`.
    pub bundle_min: usize,
    pub bundle_max: usize,
    /// Price is `bundle size × U(price_lo, price_hi)`.
    pub price_lo: f64,
    pub price_hi: f64,
    pub seed: u64,
}

impl Default for WdpGenConfig {
    fn default() -> Self {
        WdpGenConfig {
            goods: 10,
            bids: 20,
            bundle_min: 2,
            bundle_max: 5,
            price_lo: 0.8,
            price_hi: 1.25,
            seed: 0,
        }
    }
}

/// Set-packing program: one binary per bid, one `≤ 1` row per good that
/// appears in some bundle.
pub fn generate_instance(cfg: &WdpGenConfig) -> Result<IntegerProgram> {
    if cfg.goods == 0 || cfg.bids == 0 {
        return Err(Error::argument(
            "generator needs at least one good and one bid",
        ));
    }
    if cfg.bundle_min == 0 || cfg.bundle_min > cfg.bundle_max {
        return Err(Error::argument(
            "bundle size range must satisfy 1 <= min <= max",
        ));
    }
    if !(0.0 < cfg.price_lo && cfg.price_lo < cfg.price_hi) {
        return Err(Error::argument("price range must satisfy 0 < lo < hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bundles = Vec::with_capacity(cfg.bids);
    let mut prices = Vec::with_capacity(cfg.bids);
    for _ in 0..cfg.bids {
        let size = rng
            .gen_range(cfg.bundle_min..=cfg.bundle_max)
            .min(cfg.goods);
        let mut goods = sample(&mut rng, cfg.goods, size).into_vec();
        goods.sort_unstable();
        prices.push(size as f64 * rng.gen_range(cfg.price_lo..cfg.price_hi));
        bundles.push(goods);
    }
    let rows = (0..cfg.goods)
        .filter_map(|g| {
            let idx: Vec<usize> = (0..cfg.bids)
                .filter(|&j| bundles[j].binary_search(&g).is_ok())
                .collect();
            (!idx.is_empty()).then(|| Row {
                coef: vec![1.0; idx.len()],
                idx,
                b: 1.0,
            })
        })
        .collect();
    IntegerProgram::new(prices, rows, (0..cfg.bids).collect())
}

/// Base grid spacing for dual extraction.
pub const BASE_GRID: usize = 128;
pub const DEFAULT_GRID_EPS: f64 = 1e-4;

/// An extracted dual with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualExtraction {
    pub instance: usize,
    pub kappa: u64,
    pub grid_eps: f64,
    pub rules: RulePair,
    #[serde(flatten)]
    pub dual: PiecewiseConstant,
}

/// Tree size as a function of `r` for one program, with a shared LP cache.
pub struct TreeSizeOracle<'a> {
    ip: &'a IntegerProgram,
    config: BnbConfig,
    cache: LpCache,
}

impl<'a> TreeSizeOracle<'a> {
    pub fn new(
        ip: &'a IntegerProgram,
        rules: RulePair,
        kappa: u64,
        node_policy: NodePolicy,
    ) -> Self {
        let mut config = BnbConfig::new(rules, 0.0, kappa);
        config.node_policy = node_policy;
        TreeSizeOracle {
            ip,
            config,
            cache: LpCache::new(),
        }
    }

    /// `(min(tree_size, κ), capped)` at mixture weight `r`.
    pub fn eval(&mut self, r: f64) -> Result<(u64, bool)> {
        self.config.r = r;
        let res = branch_and_bound_cached(self.ip, &self.config, &mut self.cache)?;
        Ok((res.tree_size.min(self.config.kappa), res.capped))
    }
}

/// Samples `f` on the base grid `i/128, i < 128` and bisects every jump down
/// to `grid_eps`. The last cell `[127/128, 1)` takes its left value.
///
/// Returns the observed change points (midpoints of the final bisection
/// intervals) and the plateau values between them.
fn trace_jumps<F>(mut f: F, grid_eps: f64) -> Result<(Vec<f64>, Vec<u64>)>
where
    F: FnMut(f64) -> Result<u64>,
{
    let grid: Vec<f64> = (0..BASE_GRID)
        .map(|i| i as f64 / BASE_GRID as f64)
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid {
        values.push(f(r)?);
    }
    let mut cuts = Vec::new();
    let mut levels = vec![values[0]];
    for i in 1..grid.len() {
        bisect(
            &mut f,
            grid[i - 1],
            values[i - 1],
            grid[i],
            values[i],
            grid_eps,
            &mut cuts,
            &mut levels,
        )?;
    }
    Ok((cuts, levels))
}

#[allow(clippy::too_many_arguments)]
fn bisect<F>(
    f: &mut F,
    a: f64,
    fa: u64,
    b: f64,
    fb: u64,
    eps: f64,
    cuts: &mut Vec<f64>,
    levels: &mut Vec<u64>,
) -> Result<()>
where
    F: FnMut(f64) -> Result<u64>,
{
    if fa == fb {
        return Ok(());
    }
    if b - a <= eps {
        cuts.push(0.5 * (a + b));
        levels.push(fb);
        return Ok(());
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    bisect(f, a, fa, m, fm, eps, cuts, levels)?;
    bisect(f, m, fm, b, fb, eps, cuts, levels)
}

/// Drops cuts closer than `min_gap` to their predecessor, keeping the later
/// level.
fn merge_close_cuts(cuts: Vec<f64>, levels: Vec<u64>, min_gap: f64) -> (Vec<f64>, Vec<u64>) {
    let mut out_cuts: Vec<f64> = Vec::with_capacity(cuts.len());
    let mut out_levels = vec![levels[0]];
    for (c, l) in cuts.into_iter().zip(levels.into_iter().skip(1)) {
        if out_cuts.last().is_some_and(|&p| c - p < min_gap) {
            *out_levels.last_mut().unwrap() = l;
        } else {
            out_cuts.push(c);
            out_levels.push(l);
        }
    }
    (out_cuts, out_levels)
}

/// Piecewise-constant dual of `ip` over `r ∈ [0, 1)`.
pub fn extract_dual(
    instance: usize,
    ip: &IntegerProgram,
    rules: RulePair,
    kappa: u64,
    grid_eps: f64,
) -> Result<DualExtraction> {
    extract_dual_with(instance, ip, rules, kappa, grid_eps, NodePolicy::default())
}

pub fn extract_dual_with(
    instance: usize,
    ip: &IntegerProgram,
    rules: RulePair,
    kappa: u64,
    grid_eps: f64,
    node_policy: NodePolicy,
) -> Result<DualExtraction> {
    if !(grid_eps > 0.0 && grid_eps.is_finite()) {
        return Err(Error::argument(format!(
            "grid_eps must be positive, got {grid_eps}"
        )));
    }
    if kappa == 0 {
        return Err(Error::argument("kappa must be >= 1"));
    }
    let mut oracle = TreeSizeOracle::new(ip, rules, kappa, node_policy);
    let (cuts, levels) = trace_jumps(|r| oracle.eval(r).map(|(s, _)| s), grid_eps)?;
    let (cuts, levels) = merge_close_cuts(cuts, levels, grid_eps / 2.0);
    let mut breaks = Vec::with_capacity(cuts.len() + 2);
    breaks.push(0.0);
    breaks.extend(cuts);
    breaks.push(1.0);
    let values = levels.iter().map(|&s| s as f64 / kappa as f64).collect();
    Ok(DualExtraction {
        instance,
        kappa,
        grid_eps,
        rules,
        dual: PiecewiseConstant::new(breaks, values)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaSelection {
    pub kappa: u64,
    /// Some run reached `hard_cap`, so `kappa` is only a lower estimate.
    pub saturated: bool,
}

pub const DEFAULT_R_GRID: usize = 101;

/// Largest tree size over `instances × r_grid`, each run capped at
/// `hard_cap`.
pub fn select_kappa(
    instances: &[IntegerProgram],
    rules: RulePair,
    r_grid: usize,
    hard_cap: u64,
) -> Result<KappaSelection> {
    if instances.is_empty() {
        return Err(Error::argument("select_kappa needs at least one instance"));
    }
    if r_grid == 0 || hard_cap == 0 {
        return Err(Error::argument("r_grid and hard_cap must be positive"));
    }
    let rs: Vec<f64> = if r_grid == 1 {
        vec![0.0]
    } else {
        (0..r_grid)
            .map(|k| k as f64 / (r_grid - 1) as f64)
            .collect()
    };
    let per_instance = instances
        .par_iter()
        .map(|ip| {
            let mut oracle = TreeSizeOracle::new(ip, rules, hard_cap, NodePolicy::default());
            let mut best = 0u64;
            let mut saturated = false;
            for &r in &rs {
                let (size, capped) = oracle.eval(r)?;
                best = best.max(size);
                saturated |= capped;
            }
            Ok((best, saturated))
        })
        .collect::<Result<Vec<_>>>()?;
    if per_instance.iter().any(|&(_, s)| s) {
        return Ok(KappaSelection {
            kappa: hard_cap,
            saturated: true,
        });
    }
    Ok(KappaSelection {
        kappa: per_instance
            .iter()
            .map(|&(b, _)| b)
            .max()
            .unwrap_or(1)
            .max(1),
        saturated: false,
    })
}

/// Mean optimal L∞ approximation error `ê_j` for every `j` in `j_range`,
/// plus the largest piece count `j*` among the duals.
pub fn approx_profile(
    duals: &[PiecewiseConstant],
    j_range: RangeInclusive<usize>,
) -> Result<ApproxProfile> {
    if duals.is_empty() {
        return Err(Error::argument(
            "approximation profile needs at least one dual",
        ));
    }
    if j_range.is_empty() || *j_range.start() == 0 {
        return Err(Error::argument(
            "j range must be nonempty and start at 1 or above",
        ));
    }
    let k_max = *j_range.end();
    let per_dual = duals
        .par_iter()
        .map(|d| error_profile(d, k_max))
        .collect::<Result<Vec<_>>>()?;
    let m = duals.len() as f64;
    let e_hat: BTreeMap<usize, f64> = j_range
        .map(|j| {
            let total: f64 = per_dual.iter().map(|errs| errs[j - 1]).sum();
            (j, total / m)
        })
        .collect();
    Ok(ApproxProfile {
        e_hat,
        samples: duals.len() as u64,
        j_star: duals.iter().map(|d| d.num_pieces()).max().unwrap_or(1),
    })
}
