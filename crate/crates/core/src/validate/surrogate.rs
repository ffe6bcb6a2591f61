use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{build_chart, trailing_bars};
use super::stats::mean_std;
use super::{ChartConfig, ValidateError};
use crate::ingest::{make_surrogate, BarSeries, SurrogateMethod};
use crate::interact::{QualificationResult, Verdict};

pub const MIN_SURROGATE_SEEDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub qualification: QualificationResult,
}

/// Aggregate over a set of charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub charts: usize,
    pub qualified: usize,
    pub not_assessable: usize,
    /// `qualified / charts`.
    pub qualification_rate: f64,
    /// Mean and standard deviation of the interacting fraction over
    /// assessable charts (zero when none are assessable).
    pub mean_fraction: f64,
    pub std_fraction: f64,
}

impl RateSummary {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a QualificationResult>) -> Self {
        let results: Vec<&QualificationResult> = results.into_iter().collect();
        let charts = results.len();
        let qualified = results.iter().filter(|q| q.qualifies).count();
        let not_assessable = results.iter().filter(|q| q.verdict == Verdict::NotAssessable).count();
        let fractions: Vec<f64> = results
            .iter()
            .filter(|q| q.verdict != Verdict::NotAssessable)
            .map(|q| q.fraction)
            .collect();
        let (mean_fraction, std_fraction) = mean_std(&fractions);
        Self {
            charts,
            qualified,
            not_assessable,
            qualification_rate: if charts == 0 { 0.0 } else { qualified as f64 / charts as f64 },
            mean_fraction,
            std_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: SurrogateMethod,
    pub seeds: usize,
    pub summary: RateSummary,
    /// Real minus surrogate qualification rate.
    pub rate_gap: f64,
    /// Real minus surrogate mean interacting fraction.
    pub fraction_gap: f64,
    pub outcomes: Vec<SeedOutcome>,
}

/// Real versus surrogate qualification through the identical pipeline.
/// Reports the numbers only; no direction is presumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub instrument: String,
    pub resolution_minutes: Option<i64>,
    pub subtype: usize,
    pub real: QualificationResult,
    pub real_summary: RateSummary,
    pub methods: Vec<MethodSummary>,
}

/// Builds the real chart over the trailing bars of `series`, then the same
/// chart over surrogates of those bars, one per `(method, seed)`.
pub fn surrogate_comparison(
    instrument: &str,
    resolution_minutes: Option<i64>,
    series: &BarSeries,
    subtype: usize,
    methods: &[SurrogateMethod],
    seeds: &[u64],
    config: &ChartConfig,
) -> Result<SurrogateReport, ValidateError> {
    if seeds.len() < MIN_SURROGATE_SEEDS {
        return Err(ValidateError::TooFewSeeds {
            needed: MIN_SURROGATE_SEEDS,
            got: seeds.len(),
        });
    }
    config.validate()?;
    let schedule = config.schedule(subtype)?;
    let bars = trailing_bars(instrument, series, &schedule, config, 1).map_err(|_| {
        ValidateError::SeriesTooShort {
            needed: schedule.max_window() - 1 + config.view_bars,
            available: series.len(),
        }
    })?;
    let (_, _, real_chart) = build_chart(instrument, resolution_minutes, &bars, subtype, config)?;
    let real = real_chart.qualification;
    let real_summary = RateSummary::from_results([&real]);

    let jobs: Vec<(SurrogateMethod, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let surrogate = make_surrogate(&bars, method, seed)?;
            let (_, _, chart) = build_chart(instrument, resolution_minutes, &surrogate, subtype, config)?;
            Ok(SeedOutcome {
                seed,
                qualification: chart.qualification,
            })
        })
        .collect::<Result<Vec<_>, ValidateError>>()?;

    let methods = methods
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(&method, outcomes)| {
            let summary = RateSummary::from_results(outcomes.iter().map(|o| &o.qualification));
            MethodSummary {
                method,
                seeds: outcomes.len(),
                summary,
                rate_gap: real_summary.qualification_rate - summary.qualification_rate,
                fraction_gap: real_summary.mean_fraction - summary.mean_fraction,
                outcomes: outcomes.to_vec(),
            }
        })
        .collect();
    Ok(SurrogateReport {
        instrument: instrument.to_string(),
        resolution_minutes,
        subtype,
        real,
        real_summary,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::aggregate_time_bars;
    use crate::synth::{ticks, SynthParams};
    use crate::validate::test_support::compact_config;

    fn seeds() -> Vec<u64> {
        (0..20).collect()
    }

    #[test]
    fn too_few_seeds() {
        let s = BarSeries::from_values(&vec![1.0; 400]);
        let err = surrogate_comparison("X", None, &s, 1, &SurrogateMethod::ALL, &[1, 2], &compact_config());
        assert!(matches!(err, Err(ValidateError::TooFewSeeds { got: 2, .. })));
    }

    #[test]
    fn constant_series_not_assessable_everywhere() {
        let s = BarSeries::from_values(&vec![42.0; 400]);
        let methods = [SurrogateMethod::ShuffledReturns, SurrogateMethod::PhaseRandomized];
        let r = surrogate_comparison("X", None, &s, 1, &methods, &seeds(), &compact_config()).unwrap();
        assert_eq!(r.real.verdict, Verdict::NotAssessable);
        for m in &r.methods {
            assert_eq!(m.seeds, 20);
            assert_eq!(m.summary.not_assessable, 20);
        }
    }

    #[test]
    fn deterministic_and_matches_manual_reruns() {
        let t = ticks(&SynthParams {
            count: 20_000,
            ..Default::default()
        });
        let series = aggregate_time_bars(&t, 60_000).unwrap();
        let config = compact_config();
        let methods = [SurrogateMethod::ShuffledReturns, SurrogateMethod::GbmFit];
        let a = surrogate_comparison("S", Some(1), &series, 1, &methods, &seeds(), &config).unwrap();
        let b = surrogate_comparison("S", Some(1), &series, 1, &methods, &seeds(), &config).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());

        let schedule = config.schedule(1).unwrap();
        let bars = trailing_bars("S", &series, &schedule, &config, 1).unwrap();
        let seed = 7;
        let manual = build_chart("S", Some(1), &make_surrogate(&bars, methods[1], seed).unwrap(), 1, &config)
            .unwrap()
            .2
            .qualification;
        let reported = a.methods[1].outcomes.iter().find(|o| o.seed == seed).unwrap();
        assert_eq!(reported.qualification, manual);
        for m in &a.methods {
            assert!((0.0..=1.0).contains(&m.summary.qualification_rate));
        }
    }
}
