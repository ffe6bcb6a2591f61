//! Deterministic synthetic tick streams for demos and test fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ingest::Tick;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub start_ms: i64,
    pub count: usize,
    pub spacing_ms: i64,
    pub start_price: f64,
    /// Log-price standard deviation per tick.
    pub volatility: f64,
    /// Mean-reversion rate of the slowly varying drift.
    pub drift_reversion: f64,
    /// Innovation scale of the drift, relative to `volatility`.
    pub drift_scale: f64,
    pub mean_volume: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 1,
            start_ms: 1_500_000_000_000,
            count: 10_000,
            spacing_ms: 15_000,
            start_price: 100.0,
            volatility: 0.0008,
            drift_reversion: 0.002,
            drift_scale: 0.02,
            mean_volume: 100.0,
        }
    }
}

/// Log-price random walk whose drift is itself an Ornstein-Uhlenbeck
/// process, giving trending stretches and reversals.
pub fn ticks(params: &SynthParams) -> Vec<Tick> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut log_price = params.start_price.ln();
    let mut drift = 0.0;
    let mut out = Vec::with_capacity(params.count);
    for i in 0..params.count {
        let z: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        drift += -params.drift_reversion * drift + params.drift_scale * params.volatility * w;
        log_price += drift + params.volatility * z;
        let u: f64 = rng.random();
        out.push(Tick {
            timestamp: params.start_ms + i as i64 * params.spacing_ms,
            value: log_price.exp(),
            volume: params.mean_volume * (0.25 + 1.5 * u),
        });
    }
    out
}
