mod common;

use std::io::Write;

use common::*;
use toponet::ingest::{aggregate_nvb, load_ticks, read_bar_cache, write_bar_cache, CsvFormat};
use toponet::network::{build_network, Network};
use toponet::regress::CurveSchedule;
use toponet::validate::{
    build_chart, consecutive_windows, run_consecutiveness, run_simultaneity, topology_overlap, ColumnMap, Instrument,
    Protocol,
};

#[test]
fn large_csv_loads_every_row() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "timestamp,value,volume").unwrap();
    for i in 0..100_000u64 {
        writeln!(file, "{},{:.4},{}", 1_000 * i, 50.0 + (i % 97) as f64 * 0.01, 1 + i % 7).unwrap();
    }
    file.flush().unwrap();
    let ticks = load_ticks(std::fs::File::open(file.path()).unwrap(), &CsvFormat::default()).unwrap();
    assert_eq!(ticks.len(), 100_000);
    assert!(ticks.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
}

#[test]
fn bar_cache_round_trips_fixture() {
    let series = goog_daily();
    let mut buf = Vec::new();
    write_bar_cache(&series, &mut buf).unwrap();
    assert_eq!(read_bar_cache(buf.as_slice()).unwrap(), series);

    let nvb = aggregate_nvb(&goog_ticks(), 5e7).unwrap();
    let mut buf = Vec::new();
    write_bar_cache(&nvb, &mut buf).unwrap();
    assert_eq!(read_bar_cache(buf.as_slice()).unwrap(), nvb);
}

#[test]
fn network_binary_reloads_bit_identically() {
    let schedule = CurveSchedule::new(2, 40, 6, 300, 1.0).unwrap();
    let network = build_network(&goog_daily(), &schedule).unwrap();
    let mut buf = Vec::new();
    network.write_binary(&mut buf).unwrap();
    let back = Network::read_binary(buf.as_slice()).unwrap();
    assert_eq!(back, network);
    for (a, b) in network.curves().iter().zip(back.curves()) {
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn neighbouring_subtypes_overlap_on_fixture() {
    let mut config = goog_config();
    config.schedules.push(toponet::validate::ScheduleSpec {
        order: 1,
        count: 200,
        first: 5,
        last: 600,
        spacing: 1.0,
    });
    let series = goog_daily();
    let (_, _, tn1) = build_chart("GOOG", Some(1440), &series, 1, &config).unwrap();
    let (_, _, tn2) = build_chart("GOOG", Some(1440), &series, 2, &config).unwrap();
    let score = topology_overlap(&tn1.figures, &tn2.figures, ColumnMap::Identity, config.tau).unwrap();
    let self_score = topology_overlap(&tn2.figures, &tn2.figures, ColumnMap::Identity, config.tau).unwrap();
    assert!((0.0..=1.0).contains(&score), "{score}");
    assert_eq!(self_score, 1.0);
    let swapped = topology_overlap(&tn2.figures, &tn1.figures, ColumnMap::Identity, config.tau).unwrap();
    assert!((score - swapped).abs() < 1e-12);
}

#[test]
fn consecutiveness_reports_joint_probability() {
    let config = compact_config();
    let instrument = synthetic_instrument("SYN", 5);
    let report = run_consecutiveness(&instrument, None, 10, 3, 20, &config).unwrap();
    assert_eq!(report.protocol, Protocol::Consecutiveness);
    assert_eq!(report.charts.len(), 20);
    let windows: Vec<_> = report.charts.iter().map(|c| c.label.window).collect();
    assert!(windows.windows(2).all(|w| w[0].to == w[1].from));
    let last = windows.last().unwrap().to;
    assert_eq!(windows, consecutive_windows(last, config.view_bars, 20));
    for p in &report.p_values {
        assert_eq!(p.all_qualify, p.epsilon.powi(20));
        let exact = exact_binomial_tail(20, report.qualified as u64, p.epsilon);
        assert!((p.p_value - exact).abs() <= 1e-12 * exact, "{} vs {exact}", p.p_value);
    }
}

#[test]
fn simultaneity_over_ten_instruments() {
    let config = compact_config();
    let universe: Vec<Instrument> = (0..10)
        .map(|i| {
            let mut inst = synthetic_instrument(&format!("S{i}"), 100 + i);
            inst.ticks.truncate(40 * 24 * 240);
            inst
        })
        .collect();
    let a = run_simultaneity(&universe, None, 60, &config, 42).unwrap();
    let b = run_simultaneity(&universe, None, 60, &config, 42).unwrap();
    assert_eq!(a.charts.len() + a.skipped.len(), 10);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let subtypes: std::collections::BTreeSet<usize> = a.charts.iter().map(|c| c.label.subtype).collect();
    assert!(subtypes.len() > 1, "subtype draw never varied: {subtypes:?}");
    assert_eq!(a.seed, Some(42));
}
