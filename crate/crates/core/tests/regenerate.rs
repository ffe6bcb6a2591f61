//! Writes the checked-in expectation files. Run deliberately with
//! `cargo test -p toponet-core --test regenerate -- --ignored`.

mod common;

use common::*;
use toponet::render::render_chart;
use toponet::validate::build_chart;

#[test]
#[ignore]
fn regenerate_fixture_expectations() {
    let config = goog_config();
    let (network, bars, chart) = build_chart("GOOG", Some(1440), &goog_daily(), 2, &config).unwrap();
    let counts = SHIFT_DELTAS
        .iter()
        .map(|&d| rescore_oracle(&chart.extrema, &chart.figures, chart.price_range, config.tau, d))
        .collect();
    let expectation = ShiftExpectation {
        deltas: SHIFT_DELTAS.to_vec(),
        counts,
        tau: config.tau,
    };
    std::fs::write(
        fixture_path("goog_shift_expected.json"),
        serde_json::to_string_pretty(&expectation).unwrap() + "\n",
    )
    .unwrap();

    let png = render_chart(&network, &bars.bars, chart.label.window, Some(&chart.figures), &golden_style()).unwrap();
    std::fs::write(fixture_path(&format!("{}.png", chart.label.file_stem())), png).unwrap();
}
