//! Null-model series with the same length as a source series.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{BarSeries, IngestError, MIN_SURROGATE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMethod {
    /// Permutes the log-returns of `M` (arithmetic differences when the
    /// series is not strictly positive). Each bar keeps the `d` of the bar
    /// its return came from.
    ShuffledReturns,
    /// Fourier surrogate of `M`: amplitude spectrum kept, phases uniform.
    PhaseRandomized,
    /// Geometric Brownian motion with drift and volatility fitted to the
    /// log-returns of `M` (arithmetic random walk for non-positive series).
    GbmFit,
}

impl SurrogateMethod {
    pub const ALL: [SurrogateMethod; 3] = [Self::ShuffledReturns, Self::PhaseRandomized, Self::GbmFit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ShuffledReturns => "shuffled-returns",
            Self::PhaseRandomized => "phase-randomized",
            Self::GbmFit => "gbm-fit",
        }
    }
}

impl fmt::Display for SurrogateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown surrogate method `{s}`"))
    }
}

pub fn make_surrogate(series: &BarSeries, method: SurrogateMethod, seed: u64) -> Result<BarSeries, IngestError> {
    let n = series.len();
    if n < MIN_SURROGATE_LEN {
        return Err(IngestError::SeriesTooShort {
            needed: MIN_SURROGATE_LEN,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mids = series.mids();
    let positive = mids.iter().all(|&m| m > 0.0);
    let mut out = series.clone();

    match method {
        SurrogateMethod::ShuffledReturns => {
            let returns = step_returns(&mids, positive);
            // order[i] is the source step placed at position i
            let mut order: Vec<usize> = (0..returns.len()).collect();
            order.shuffle(&mut rng);
            let mut level = mids[0];
            for (i, &src) in order.iter().enumerate() {
                level = apply_step(level, returns[src], positive);
                out.bars[i + 1].m = level;
                out.bars[i + 1].d = series.bars[src + 1].d;
            }
        }
        SurrogateMethod::PhaseRandomized => {
            for (bar, m) in out.bars.iter_mut().zip(phase_randomize(&mids, &mut rng)) {
                bar.m = m;
            }
        }
        SurrogateMethod::GbmFit => {
            let returns = step_returns(&mids, positive);
            let mean = returns.iter().sum::<f64>() / returns.len() as f64;
            let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (returns.len().max(2) - 1) as f64;
            let sd = var.sqrt();
            let mut level = mids[0];
            for bar in out.bars.iter_mut().skip(1) {
                let z: f64 = rng.sample(StandardNormal);
                level = apply_step(level, mean + sd * z, positive);
                bar.m = level;
            }
        }
    }
    Ok(out)
}

fn step_returns(mids: &[f64], log: bool) -> Vec<f64> {
    mids.windows(2)
        .map(|w| if log { (w[1] / w[0]).ln() } else { w[1] - w[0] })
        .collect()
}

fn apply_step(level: f64, step: f64, log: bool) -> f64 {
    if log {
        level * step.exp()
    } else {
        level + step
    }
}

fn phase_randomize<R: Rng>(values: &[f64], rng: &mut R) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spectrum);
    // DC and (for even n) Nyquist stay real; the rest get paired random phases.
    for k in 1..n.div_ceil(2) {
        let phase = rng.random::<f64>() * 2.0 * PI;
        let rotated = Complex::from_polar(spectrum[k].norm(), phase);
        spectrum[k] = rotated;
        spectrum[n - k] = rotated.conj();
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);
    spectrum.iter().map(|c| mean + c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> BarSeries {
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = i as f64;
                (100.0 + 5.0 * (t / 7.0).sin() + 0.3 * t + (t * 1.7).cos(), 0.1 + (i % 5) as f64 * 0.05)
            })
            .collect();
        BarSeries::from_mid_half_range(&pairs)
    }

    /// Direct O(n^2) DFT amplitudes.
    fn dft_amplitudes(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    #[test]
    fn same_seed_same_output() {
        let s = fixture(64);
        for method in SurrogateMethod::ALL {
            assert_eq!(make_surrogate(&s, method, 9).unwrap(), make_surrogate(&s, method, 9).unwrap());
            assert_ne!(make_surrogate(&s, method, 9).unwrap(), make_surrogate(&s, method, 10).unwrap());
        }
    }

    #[test]
    fn shuffled_returns_preserve_return_multiset() {
        let s = fixture(200);
        let sur = make_surrogate(&s, SurrogateMethod::ShuffledReturns, 3).unwrap();
        let mut a = step_returns(&s.mids(), true);
        let mut b = step_returns(&sur.mids(), true);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        // d travels with its source bar
        let mut da: Vec<f64> = s.bars.iter().map(|b| b.d).collect();
        let mut db: Vec<f64> = sur.bars.iter().map(|b| b.d).collect();
        da.sort_by(f64::total_cmp);
        db.sort_by(f64::total_cmp);
        assert_eq!(da, db);
    }

    #[test]
    fn phase_randomized_preserves_amplitudes() {
        for n in [64usize, 101] {
            let s = fixture(n);
            let sur = make_surrogate(&s, SurrogateMethod::PhaseRandomized, 11).unwrap();
            let a = dft_amplitudes(&s.mids());
            let b = dft_amplitudes(&sur.mids());
            let scale = a.iter().cloned().fold(0.0, f64::max);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-6 * x.max(1e-3 * scale), "{x} vs {y}");
            }
            assert_ne!(s.mids(), sur.mids());
        }
    }

    #[test]
    fn short_series_rejected() {
        let s = fixture(15);
        assert!(matches!(
            make_surrogate(&s, SurrogateMethod::GbmFit, 0),
            Err(IngestError::SeriesTooShort { needed: 16, available: 15 })
        ));
    }

    #[test]
    fn constant_series_stays_constant() {
        let s = BarSeries::from_values(&[4.0; 32]);
        for method in SurrogateMethod::ALL {
            let sur = make_surrogate(&s, method, 1).unwrap();
            assert!(sur.mids().iter().all(|&m| m == 4.0), "{method}");
        }
    }

    #[test]
    fn method_names_parse() {
        for m in SurrogateMethod::ALL {
            assert_eq!(m.as_str().parse::<SurrogateMethod>().unwrap(), m);
        }
        assert!("bootstrap".parse::<SurrogateMethod>().is_err());
    }
}
