//! Seeded inputs shared by the benchmarks.

use configbounds_core::configspace::{generate_instance, WdpGenConfig};
use configbounds_core::rademacher::DualSample;
use configbounds_core::solver::IntegerProgram;
use configbounds_core::PiecewiseConstant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-constant function on `[0, 1]` with `t` equal-width pieces.
pub fn uniform_function(t: usize, seed: u64) -> PiecewiseConstant {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..t).map(|_| rng.gen()).collect();
    PiecewiseConstant::uniform(0.0, 1.0, &values).expect("t >= 1")
}

/// `n` functions of `pieces` pieces each.
pub fn dual_sample(n: usize, pieces: usize, seed: u64) -> DualSample {
    let duals = (0..n as u64)
        .map(|i| uniform_function(pieces, seed.wrapping_add(i)))
        .collect();
    DualSample::new(duals).expect("n >= 1")
}

/// Winner-determination instance with `bids` bids over `goods` goods.
pub fn auction(goods: usize, bids: usize, seed: u64) -> IntegerProgram {
    generate_instance(&WdpGenConfig {
        goods,
        bids,
        seed,
        ..WdpGenConfig::default()
    })
    .expect("valid generator settings")
}
