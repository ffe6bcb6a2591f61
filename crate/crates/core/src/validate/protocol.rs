use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{analyze_window, build_chart, chart_bars, trailing_bars, ChartLabel};
use super::stats::{binomial_tail, ln_binomial_tail};
use super::{ChartConfig, Instrument, ValidateError};
use crate::figures::ViewWindow;
use crate::interact::{QualificationResult, Verdict};
use crate::network::Network;

/// Bar periods, in minutes, of the totality sweep.
pub const TOTALITY_RESOLUTIONS_MINUTES: [i64; 4] = [1, 10, 60, 360];

/// Stated in every report next to the p-values.
pub const INDEPENDENCE_ASSUMPTION: &str = "p-values treat every chart as an independent trial that qualifies \
     by chance with probability eps. Charts sharing an instrument, overlapping history or one network are \
     correlated, so these values are optimistic; the raw qualification fraction is reported alongside.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Simultaneity,
    Totality,
    Consecutiveness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartVerdict {
    pub label: ChartLabel,
    pub qualification: QualificationResult,
}

/// A chart the protocol could not build.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedChart {
    pub instrument: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPValue {
    pub epsilon: f64,
    /// `P[Binomial(charts, eps) >= qualified]`.
    pub p_value: f64,
    pub log10_p_value: f64,
    /// `eps^charts`, the chance that every chart qualifies.
    pub all_qualify: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: Protocol,
    pub charts: Vec<ChartVerdict>,
    pub skipped: Vec<SkippedChart>,
    pub qualified: usize,
    pub not_assessable: usize,
    /// `qualified / charts`; not-assessable charts count as not qualifying.
    pub qualification_rate: f64,
    /// Mean interacting fraction over assessable charts.
    pub mean_interaction_fraction: Option<f64>,
    pub p_values: Vec<EpsilonPValue>,
    pub assumption: String,
    /// Seed of the subtype draw, when the protocol randomizes.
    pub seed: Option<u64>,
}

impl ProtocolReport {
    pub fn new(protocol: Protocol, charts: Vec<ChartVerdict>, skipped: Vec<SkippedChart>, epsilons: &[f64]) -> Self {
        let n = charts.len();
        let qualified = charts.iter().filter(|c| c.qualification.qualifies).count();
        let not_assessable = charts
            .iter()
            .filter(|c| c.qualification.verdict == Verdict::NotAssessable)
            .count();
        let assessable: Vec<f64> = charts
            .iter()
            .filter(|c| c.qualification.verdict != Verdict::NotAssessable)
            .map(|c| c.qualification.fraction)
            .collect();
        let mean_interaction_fraction =
            (!assessable.is_empty()).then(|| assessable.iter().sum::<f64>() / assessable.len() as f64);
        let p_values = epsilons
            .iter()
            .map(|&eps| EpsilonPValue {
                epsilon: eps,
                p_value: binomial_tail(n as u64, qualified as u64, eps),
                log10_p_value: ln_binomial_tail(n as u64, qualified as u64, eps) / std::f64::consts::LN_10,
                all_qualify: eps.powi(n as i32),
            })
            .collect();
        Self {
            protocol,
            qualification_rate: if n == 0 { 0.0 } else { qualified as f64 / n as f64 },
            charts,
            skipped,
            qualified,
            not_assessable,
            mean_interaction_fraction,
            p_values,
            assumption: INDEPENDENCE_ASSUMPTION.to_string(),
            seed: None,
        }
    }

    /// Plain-text summary for terminals and logs.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "protocol: {:?}\ncharts: {}  qualified: {}  not assessable: {}  skipped: {}\nqualification rate: {:.4}\n",
            self.protocol,
            self.charts.len(),
            self.qualified,
            self.not_assessable,
            self.skipped.len(),
            self.qualification_rate
        );
        if let Some(f) = self.mean_interaction_fraction {
            out.push_str(&format!("mean interaction fraction: {f:.4}\n"));
        }
        for c in &self.charts {
            out.push_str(&format!(
                "  {:<40} {:>3}/{:<3} {:?}\n",
                c.label.file_stem(),
                c.qualification.interacting,
                c.qualification.extrema,
                c.qualification.verdict
            ));
        }
        for s in &self.skipped {
            out.push_str(&format!("  skipped {}: {}\n", s.instrument, s.reason));
        }
        for p in &self.p_values {
            out.push_str(&format!(
                "eps {:<6} p = {:.6e} (log10 {:.3})  all-qualify {:.3e}\n",
                p.epsilon, p.p_value, p.log10_p_value, p.all_qualify
            ));
        }
        out.push_str(&self.assumption);
        out.push('\n');
        out
    }
}

fn verdict(label: ChartLabel, q: QualificationResult) -> ChartVerdict {
    ChartVerdict { label, qualification: q }
}

/// One chart per instrument at the same date and resolution, each with a
/// subtype drawn uniformly from the configured ones. Instruments lacking
/// history are listed in `skipped`.
pub fn run_simultaneity(
    universe: &[Instrument],
    date: Option<i64>,
    resolution_minutes: i64,
    config: &ChartConfig,
    seed: u64,
) -> Result<ProtocolReport, ValidateError> {
    if universe.len() < 2 {
        return Err(ValidateError::UniverseTooSmall(universe.len()));
    }
    config.validate()?;
    let subtypes = config.subtypes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<usize> = universe
        .iter()
        .map(|_| subtypes[rng.random_range(0..subtypes.len())])
        .collect();
    let results: Vec<Result<ChartVerdict, ValidateError>> = universe
        .par_iter()
        .zip(&draws)
        .map(|(inst, &subtype)| {
            let series = chart_bars(&inst.symbol, &inst.ticks, resolution_minutes, date)?;
            let (_, _, chart) = build_chart(&inst.symbol, Some(resolution_minutes), &series, subtype, config)?;
            Ok(verdict(chart.label, chart.qualification))
        })
        .collect();
    let mut charts = Vec::new();
    let mut skipped = Vec::new();
    for (inst, r) in universe.iter().zip(results) {
        match r {
            Ok(v) => charts.push(v),
            Err(e) if e.is_insufficient_history() => skipped.push(SkippedChart {
                instrument: inst.symbol.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let mut report = ProtocolReport::new(Protocol::Simultaneity, charts, skipped, &config.epsilons);
    report.seed = Some(seed);
    Ok(report)
}

/// Every configured subtype at every resolution of
/// [`TOTALITY_RESOLUTIONS_MINUTES`], all ending at `date`.
pub fn run_totality(
    instrument: &Instrument,
    date: Option<i64>,
    config: &ChartConfig,
) -> Result<ProtocolReport, ValidateError> {
    config.validate()?;
    let series: Vec<_> = TOTALITY_RESOLUTIONS_MINUTES
        .iter()
        .map(|&res| chart_bars(&instrument.symbol, &instrument.ticks, res, date).map(|s| (res, s)))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..series.len())
        .flat_map(|r| config.subtypes().into_iter().map(move |d| (d, r)))
        .collect();
    for &(d, r) in &jobs {
        let schedule = config.schedule(d)?;
        trailing_bars(&instrument.symbol, &series[r].1, &schedule, config, 1)?;
    }
    let charts = jobs
        .par_iter()
        .map(|&(d, r)| {
            let (res, bars) = &series[r];
            let (_, _, chart) = build_chart(&instrument.symbol, Some(*res), bars, d, config)?;
            Ok(verdict(chart.label, chart.qualification))
        })
        .collect::<Result<Vec<_>, ValidateError>>()?;
    Ok(ProtocolReport::new(Protocol::Totality, charts, Vec::new(), &config.epsilons))
}

/// `[from, to)` of the `windows` adjacent views that end a series of `len`
/// bars, each `view_bars` wide.
pub fn consecutive_windows(len: usize, view_bars: usize, windows: usize) -> Vec<ViewWindow> {
    let start = len - windows * view_bars;
    (0..windows)
        .map(|i| ViewWindow::new(start + i * view_bars, start + (i + 1) * view_bars))
        .collect()
}

/// `windows` adjacent, non-overlapping charts cut from one network.
pub fn run_consecutiveness(
    instrument: &Instrument,
    date: Option<i64>,
    resolution_minutes: i64,
    subtype: usize,
    windows: usize,
    config: &ChartConfig,
) -> Result<ProtocolReport, ValidateError> {
    config.validate()?;
    if windows == 0 {
        return Err(ValidateError::InvalidConfig("window count must be positive".into()));
    }
    let series = chart_bars(&instrument.symbol, &instrument.ticks, resolution_minutes, date)?;
    let schedule = config.schedule(subtype)?;
    let bars = trailing_bars(&instrument.symbol, &series, &schedule, config, windows)?;
    let network = Network::from_mids(bars.mids(), schedule)?;
    let charts = consecutive_windows(bars.len(), config.view_bars, windows)
        .into_par_iter()
        .map(|window| {
            let label = ChartLabel {
                instrument: instrument.symbol.clone(),
                resolution_minutes: Some(resolution_minutes),
                subtype,
                window,
            };
            let chart = analyze_window(label, &network, &bars.bars, config)?;
            Ok(verdict(chart.label, chart.qualification))
        })
        .collect::<Result<Vec<_>, ValidateError>>()?;
    Ok(ProtocolReport::new(Protocol::Consecutiveness, charts, Vec::new(), &config.epsilons))
}
