#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackcache::{CpParams, Market, MarketConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid market with `m` providers: alpha in [max(M, 1.5), 50],
/// p_mean in [0.5, 3], delta_p in [0, 1], S in [20, 500] split over 1..=4 SBSs.
pub fn random_market(rng: &mut ChaCha8Rng, m: usize) -> Market {
    let lo = (m as f64).max(1.5);
    let cps = (0..m)
        .map(|_| {
            CpParams::new(
                rng.random_range(lo..50.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..1.0),
                rng.random_range(1..10_000),
            )
        })
        .collect();
    let s: f64 = rng.random_range(20.0..500.0);
    let n = rng.random_range(1..=4);
    let caps = vec![s / n as f64; n];
    Market::new(MarketConfig::new(caps, cps)).expect("generator produces valid markets")
}

pub fn market_from(alphas: &[f64], s: f64, p_mean: f64, delta_p: f64) -> Market {
    let cps = alphas.iter().map(|&a| CpParams::new(a, p_mean, delta_p, 100_000)).collect();
    Market::new(MarketConfig::new(vec![s], cps)).unwrap()
}

/// The scenario configs shipped in `configs/`.
pub fn shipped_config(name: &str) -> MarketConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/");
    MarketConfig::from_path(format!("{path}{name}")).unwrap()
}
