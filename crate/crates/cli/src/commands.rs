//! Command execution. Every command writes its artifacts under the output
//! directory and returns their paths.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use toponet::figures::{extrapolate_figure, CharacteristicFigure, ViewWindow};
use toponet::ingest::{aggregate_nvb, write_bar_cache, BarSeries};
use toponet::network::build_network;
use toponet::render::{rasterize, render_svg};
use toponet::validate::{
    analyze_window, run_consecutiveness, run_simultaneity, run_totality, shift_test, surrogate_comparison, Chart,
    ChartConfig, ChartLabel, Instrument, ValidateError,
};
use toponet::Network;

use crate::artifact::{write_enveloped, write_json, write_png, write_svg, write_text};
use crate::cli::{Command, ProtocolCommand};
use crate::config::{ExtrapolationParams, RunConfig};
use crate::data::DataStore;
use crate::ShellError;

/// A figure and its forward projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedFigure {
    #[serde(flatten)]
    pub figure: CharacteristicFigure,
    /// `(bar index, ordinate)` past the last ridge column; empty when the
    /// figure is too short to fit.
    pub extrapolation: Vec<(usize, f64)>,
}

pub fn project_figures(figures: &[CharacteristicFigure], params: &ExtrapolationParams) -> Vec<ProjectedFigure> {
    figures
        .iter()
        .map(|f| ProjectedFigure {
            figure: f.clone(),
            extrapolation: extrapolate_figure(f, params.horizon, params.order).unwrap_or_default(),
        })
        .collect()
}

/// Analyses the last `view_bars` of a network built over all of `series`.
/// The server's default window goes through the same path, so both report
/// identical charts.
pub fn latest_chart(
    symbol: &str,
    resolution_minutes: i64,
    series: &BarSeries,
    subtype: usize,
    config: &ChartConfig,
) -> Result<(Network, Chart), ShellError> {
    let needed = config.bars_needed(subtype, 1)?;
    if series.len() < needed {
        return Err(ValidateError::InsufficientHistory {
            instrument: symbol.to_string(),
            reason: format!("TN{subtype} needs {needed} bars, have {}", series.len()),
        }
        .into());
    }
    let network = build_network(series, &config.schedule(subtype)?)?;
    let label = ChartLabel {
        instrument: symbol.to_string(),
        resolution_minutes: Some(resolution_minutes),
        subtype,
        window: ViewWindow::new(series.len() - config.view_bars, series.len()),
    };
    let chart = analyze_window(label, &network, &series.bars, config)?;
    Ok((network, chart))
}

fn stored_chart(
    config: &RunConfig,
    store: &DataStore,
    symbol: &str,
    subtype: usize,
) -> Result<(Network, BarSeries, Chart), ShellError> {
    let series = store.bars(symbol, config.resolution_minutes, config.date)?;
    let (network, chart) = latest_chart(symbol, config.resolution_minutes, &series, subtype, &config.chart)?;
    Ok((network, series, chart))
}

fn out(config: &RunConfig, dir: &str, name: String) -> PathBuf {
    config.output_dir.join(dir).join(name)
}

fn stem(config: &RunConfig, symbol: &str, subtype: usize) -> String {
    format!("{symbol}_{}m_TN{subtype}", config.resolution_minutes)
}

fn universe(config: &RunConfig, store: &DataStore, symbols: &[String]) -> Result<Vec<Instrument>, ShellError> {
    let names: Vec<String> = if !symbols.is_empty() {
        symbols.to_vec()
    } else if !config.protocol.universe.is_empty() {
        config.protocol.universe.clone()
    } else {
        store.instruments()?.into_iter().map(|i| i.symbol).collect()
    };
    names.iter().map(|s| store.instrument(s)).collect()
}

/// Runs one command. `serve` blocks until the server shuts down.
pub fn run_pipeline(config: &RunConfig, command: &Command) -> Result<Vec<PathBuf>, ShellError> {
    config.validate()?;
    let store = DataStore::new(config);
    match command {
        Command::Bars { symbol, nvb } => {
            let (series, name) = match nvb {
                Some(quota) => (
                    aggregate_nvb(&store.ticks(symbol)?, *quota)?,
                    format!("{symbol}_nvb{quota}.bars"),
                ),
                None => (
                    store.bars(symbol, config.resolution_minutes, config.date)?,
                    format!("{symbol}_{}m.bars", config.resolution_minutes),
                ),
            };
            let mut payload = Vec::new();
            write_bar_cache(&series, &mut payload)?;
            Ok(vec![write_enveloped(&out(config, "bars", name), config, &payload)?])
        }
        Command::Build { symbol, subtype } => {
            let series = store.bars(symbol, config.resolution_minutes, config.date)?;
            let network = build_network(&series, &config.chart.schedule(*subtype)?)?;
            let mut payload = Vec::new();
            network.write_binary(&mut payload)?;
            let path = out(config, "networks", format!("{}.tnet", stem(config, symbol, *subtype)));
            Ok(vec![write_enveloped(&path, config, &payload)?])
        }
        Command::Render { symbol, subtype, svg } => {
            let (network, bars, chart) = stored_chart(config, &store, symbol, *subtype)?;
            let window = chart.label.window;
            let name = chart.label.file_stem();
            let path = if *svg {
                let doc = render_svg(&network, &bars.bars, window, Some(&chart.figures), &config.render)?;
                write_svg(&out(config, "charts", format!("{name}.svg")), &doc, config)?
            } else {
                let raster = rasterize(&network, &bars.bars, window, Some(&chart.figures), &config.render)?;
                write_png(&out(config, "charts", format!("{name}.png")), &raster, config)?
            };
            Ok(vec![path])
        }
        Command::Figures { symbol, subtype } => {
            let (_, _, chart) = stored_chart(config, &store, symbol, *subtype)?;
            #[derive(Serialize)]
            struct FigureReport<'a> {
                label: &'a toponet::validate::ChartLabel,
                bounds: (f64, f64),
                figures: Vec<ProjectedFigure>,
            }
            let report = FigureReport {
                label: &chart.label,
                bounds: chart.bounds,
                figures: project_figures(&chart.figures, &config.extrapolation),
            };
            let path = out(config, "figures", format!("{}.json", chart.label.file_stem()));
            Ok(vec![write_json(&path, "figures", config, &report)?])
        }
        Command::Qualify { symbol, subtype } => {
            let (_, _, chart) = stored_chart(config, &store, symbol, *subtype)?;
            let path = out(config, "qualify", format!("{}.json", chart.label.file_stem()));
            Ok(vec![write_json(&path, "qualify", config, &chart)?])
        }
        Command::ShiftTest { symbol, subtype, deltas } => {
            let (_, _, chart) = stored_chart(config, &store, symbol, *subtype)?;
            let deltas = deltas.as_deref().unwrap_or(&config.shift_deltas);
            let result = shift_test(&chart.extrema, &chart.figures, chart.price_range, config.chart.tau, deltas);
            let path = out(config, "shift", format!("{}.json", chart.label.file_stem()));
            Ok(vec![write_json(&path, "shift-test", config, &result)?])
        }
        Command::Protocol(p) => {
            let (report, name) = match p {
                ProtocolCommand::Simultaneity { symbols } => {
                    let universe = universe(config, &store, symbols)?;
                    let report =
                        run_simultaneity(&universe, config.date, config.resolution_minutes, &config.chart, config.seed)?;
                    (report, format!("simultaneity_{}m_seed{}", config.resolution_minutes, config.seed))
                }
                ProtocolCommand::Totality { symbol } => {
                    let report = run_totality(&store.instrument(symbol)?, config.date, &config.chart)?;
                    (report, format!("totality_{symbol}"))
                }
                ProtocolCommand::Consecutiveness { symbol, subtype, windows } => {
                    let subtype = subtype.unwrap_or(config.protocol.subtype);
                    let windows = windows.unwrap_or(config.protocol.windows);
                    let report = run_consecutiveness(
                        &store.instrument(symbol)?,
                        config.date,
                        config.resolution_minutes,
                        subtype,
                        windows,
                        &config.chart,
                    )?;
                    (report, format!("consecutiveness_{}_W{windows}", stem(config, symbol, subtype)))
                }
            };
            Ok(vec![
                write_json(&out(config, "reports", format!("{name}.json")), "protocol", config, &report)?,
                write_text(&out(config, "reports", format!("{name}.txt")), config, &report.to_text())?,
            ])
        }
        Command::Surrogate { symbol, subtype } => {
            let series = store.bars(symbol, config.resolution_minutes, config.date)?;
            let report = surrogate_comparison(
                symbol,
                Some(config.resolution_minutes),
                &series,
                *subtype,
                &config.surrogate.methods,
                &config.surrogate_seeds(),
                &config.chart,
            )?;
            let path = out(config, "reports", format!("surrogate_{}.json", stem(config, symbol, *subtype)));
            Ok(vec![write_json(&path, "surrogate", config, &report)?])
        }
        Command::Serve { addr } => {
            let mut config = config.clone();
            if let Some(a) = addr {
                config.server.addr = a.clone();
            }
            crate::server::serve_blocking(config)?;
            Ok(Vec::new())
        }
    }
}
