use serde::{Deserialize, Serialize};

use super::{ChartConfig, ValidateError};
use crate::figures::{density_field, detect_figures, CharacteristicFigure, FieldOptions, Splat, ViewWindow};
use crate::ingest::{aggregate_time_bars, median_tick_spacing, Bar, BarSeries, Tick};
use crate::interact::{detect_extrema, price_range, qualify_chart, score_interactions, Extremum, Interaction, QualificationResult};
use crate::network::Network;
use crate::regress::CurveSchedule;

/// Identifies a chart inside a report.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChartLabel {
    pub instrument: String,
    /// Bar period in minutes; `None` for untimed series.
    pub resolution_minutes: Option<i64>,
    pub subtype: usize,
    pub window: ViewWindow,
}

impl ChartLabel {
    /// `instrument_resolution_subtype_window`, the stem for artifact files.
    pub fn file_stem(&self) -> String {
        let res = match self.resolution_minutes {
            Some(m) => format!("{m}m"),
            None => "raw".to_string(),
        };
        format!("{}_{}_TN{}_{}-{}", self.instrument, res, self.subtype, self.window.from, self.window.to)
    }
}

/// One analysed chart: figures, extrema, interactions and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub label: ChartLabel,
    /// Price bounds of the density grid.
    pub bounds: (f64, f64),
    /// `max H - min L` over the view.
    pub price_range: f64,
    pub figures: Vec<CharacteristicFigure>,
    pub extrema: Vec<Extremum>,
    pub interactions: Vec<Interaction>,
    pub qualification: QualificationResult,
}

/// Time bars of `ticks` up to `date` (inclusive, epoch ms) at
/// `resolution_minutes`. Fails when the ticks are sparser than the bar period.
pub fn chart_bars(
    instrument: &str,
    ticks: &[Tick],
    resolution_minutes: i64,
    date: Option<i64>,
) -> Result<BarSeries, ValidateError> {
    let end = match date {
        Some(d) => ticks.partition_point(|t| t.timestamp <= d),
        None => ticks.len(),
    };
    let ticks = &ticks[..end];
    let period_ms = resolution_minutes * 60_000;
    match median_tick_spacing(ticks) {
        Some(spacing) if spacing <= period_ms => {}
        Some(spacing) => {
            return Err(ValidateError::InsufficientHistory {
                instrument: instrument.to_string(),
                reason: format!("no {resolution_minutes}-minute data (median tick spacing {spacing} ms)"),
            })
        }
        None => {
            return Err(ValidateError::InsufficientHistory {
                instrument: instrument.to_string(),
                reason: "fewer than 2 ticks".to_string(),
            })
        }
    }
    Ok(aggregate_time_bars(ticks, period_ms)?)
}

fn grid_bounds(network: &Network, bars: &[Bar], window: ViewWindow) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for curve in network.curves() {
        for t in window.from.max(curve.start())..window.to {
            let v = curve.values[t - curve.start()];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    for b in &bars[window.from..window.to] {
        lo = lo.min(b.low());
        hi = hi.max(b.high());
    }
    (lo, hi)
}

/// Runs field, detection, extrema, scoring and qualification for the bars
/// `window` of an already built network. `bars[t]` must be the bar the
/// network consumed at index `t`.
pub fn analyze_window(
    label: ChartLabel,
    network: &Network,
    bars: &[Bar],
    config: &ChartConfig,
) -> Result<Chart, ValidateError> {
    let window = label.window;
    if window.columns() < 3 || window.to > network.len() || window.to > bars.len() {
        return Err(ValidateError::SeriesTooShort {
            needed: window.to.max(window.from + 3),
            available: network.len().min(bars.len()),
        });
    }
    let bounds = grid_bounds(network, bars, window);
    let field = density_field(
        network,
        window,
        config.figures.rows,
        FieldOptions {
            splat: Splat::Linear,
            bounds: Some(bounds),
            rank_split: config.rank_split,
        },
    )?;
    let figures = detect_figures(&field, &config.figures);
    let view = &bars[window.from..window.to];
    let range = price_range(view);
    let extrema = detect_extrema(view, config.prominence, config.min_separation).map_err(|_| {
        ValidateError::SeriesTooShort {
            needed: 3,
            available: view.len(),
        }
    })?;
    let interactions = score_interactions(&extrema, &figures, config.tau, range);
    let qualification = qualify_chart(&interactions, config.qualification_threshold, config.min_extrema);
    Ok(Chart {
        label,
        bounds,
        price_range: range,
        figures,
        extrema,
        interactions,
        qualification,
    })
}

/// The bars a chart of `schedule` needs: `history` before the view plus the
/// view itself, taken from the end of `series`.
pub(crate) fn trailing_bars(
    instrument: &str,
    series: &BarSeries,
    schedule: &CurveSchedule,
    config: &ChartConfig,
    windows: usize,
) -> Result<BarSeries, ValidateError> {
    let history = if config.require_full_network {
        schedule.max_window() - 1
    } else {
        schedule.min_window()
    };
    let needed = history + windows * config.view_bars;
    if series.len() < needed {
        return Err(ValidateError::InsufficientHistory {
            instrument: instrument.to_string(),
            reason: format!("{} needs {needed} bars, have {}", schedule.label(), series.len()),
        });
    }
    Ok(series.range(series.len() - needed, series.len()))
}

/// Builds the network over the trailing bars of `series` and analyses the
/// last `view_bars` of them.
pub fn build_chart(
    instrument: &str,
    resolution_minutes: Option<i64>,
    series: &BarSeries,
    subtype: usize,
    config: &ChartConfig,
) -> Result<(Network, BarSeries, Chart), ValidateError> {
    let schedule = config.schedule(subtype)?;
    let bars = trailing_bars(instrument, series, &schedule, config, 1)?;
    let network = Network::from_mids(bars.mids(), schedule)?;
    let window = ViewWindow::new(bars.len() - config.view_bars, bars.len());
    let label = ChartLabel {
        instrument: instrument.to_string(),
        resolution_minutes,
        subtype,
        window,
    };
    let chart = analyze_window(label, &network, &bars.bars, config)?;
    Ok((network, bars, chart))
}

/// `(markedness, mean amplitude)` for every figure with at least one
/// interacting extremum. Amplitude is the extremum prominence as a fraction
/// of the view price range.
pub fn markedness_amplitude_pairs(chart: &Chart) -> Vec<(f64, f64)> {
    chart
        .figures
        .iter()
        .filter_map(|f| {
            let amps: Vec<f64> = chart
                .interactions
                .iter()
                .filter(|i| i.interacting && i.figure_id == Some(f.id))
                .map(|i| i.extremum.prominence / chart.price_range)
                .collect();
            (!amps.is_empty()).then(|| (f.markedness, amps.iter().sum::<f64>() / amps.len() as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ticks, SynthParams};
    use crate::validate::test_support::compact_config;

    #[test]
    fn chart_pipeline_is_consistent() {
        let t = ticks(&SynthParams {
            count: 30_000,
            ..Default::default()
        });
        let series = chart_bars("SYN", &t, 1, None).unwrap();
        let config = compact_config();
        let (network, bars, chart) = build_chart("SYN", Some(1), &series, 2, &config).unwrap();
        assert_eq!(bars.len(), 119 + 120);
        assert_eq!(network.len(), bars.len());
        assert_eq!(chart.label.window, ViewWindow::new(119, 239));
        assert_eq!(chart.interactions.len(), chart.extrema.len());
        assert_eq!(chart.qualification.extrema, chart.extrema.len());
        assert!(chart.extrema.iter().all(|e| chart.label.window.contains(e.index)));
        let pairs = markedness_amplitude_pairs(&chart);
        assert!(pairs.len() <= chart.figures.len());
        assert!(pairs.iter().all(|&(m, a)| m > 0.0 && a > 0.0 && a <= 1.0));
        assert_eq!(chart.label.file_stem(), "SYN_1m_TN2_119-239");
    }

    #[test]
    fn too_little_history_is_reported() {
        let series = BarSeries::from_values(&vec![1.0; 100]);
        let err = build_chart("X", None, &series, 3, &compact_config()).unwrap_err();
        assert!(err.is_insufficient_history());
    }

    #[test]
    fn sparse_ticks_lack_fine_resolution() {
        let t = ticks(&SynthParams {
            count: 100,
            spacing_ms: 120_000,
            ..Default::default()
        });
        assert!(chart_bars("X", &t, 1, None).unwrap_err().is_insufficient_history());
        assert!(chart_bars("X", &t, 10, None).is_ok());
    }
}
