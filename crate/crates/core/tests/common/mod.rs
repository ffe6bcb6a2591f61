//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use toponet::figures::{CharacteristicFigure, Side};
use toponet::ingest::{aggregate_time_bars, load_ticks, BarSeries, CsvFormat, Tick};
use toponet::interact::{Extremum, ExtremumKind};
use toponet::render::RenderStyle;
use toponet::synth::{ticks, SynthParams};
use toponet::validate::{ChartConfig, Instrument, ScheduleSpec};

pub const DAY_MS: i64 = 86_400_000;
pub const SHIFT_DELTAS: [f64; 7] = [0.0, 0.01, -0.01, 0.02, -0.02, 0.05, -0.05];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn goog_ticks() -> Vec<Tick> {
    let file = std::fs::File::open(fixture_path("goog_daily_ticks.csv")).expect("fixture csv");
    load_ticks(file, &CsvFormat::default()).expect("fixture parses")
}

/// Daily bars of the real-data fixture.
pub fn goog_daily() -> BarSeries {
    aggregate_time_bars(&goog_ticks(), DAY_MS).expect("fixture aggregates")
}

/// The fixture chart: TN2 with 200 curves over 6..600 bars, last 400 days shown.
pub fn goog_config() -> ChartConfig {
    ChartConfig {
        view_bars: 400,
        schedules: vec![ScheduleSpec {
            order: 2,
            count: 200,
            first: 6,
            last: 600,
            spacing: 1.0,
        }],
        ..Default::default()
    }
}

/// Compact TN1..TN5 schedules (50 curves, windows `D + 4 ..= 60 D`) for the
/// protocol fixtures, so a full sweep runs in seconds.
pub fn compact_config() -> ChartConfig {
    ChartConfig {
        view_bars: 120,
        schedules: (1..=5)
            .map(|d| ScheduleSpec {
                order: d,
                count: 50,
                first: d + 4,
                last: 60 * d,
                spacing: 1.0,
            })
            .collect(),
        ..Default::default()
    }
}

/// Synthetic 15-second instrument long enough for 360-minute TN5 charts
/// under [`compact_config`].
pub fn synthetic_instrument(symbol: &str, seed: u64) -> Instrument {
    Instrument {
        symbol: symbol.to_string(),
        ticks: ticks(&SynthParams {
            seed,
            count: 110 * 24 * 240,
            ..Default::default()
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftExpectation {
    pub deltas: Vec<f64>,
    pub counts: Vec<usize>,
    pub tau: f64,
}

pub fn read_shift_expectation() -> ShiftExpectation {
    let text = std::fs::read_to_string(fixture_path("goog_shift_expected.json")).expect("expectation file");
    serde_json::from_str(&text).expect("expectation parses")
}

/// Ridge ordinate at `column` by linear interpolation between bracketing
/// vertices, written independently of the library.
fn ridge_at(f: &CharacteristicFigure, column: usize) -> Option<f64> {
    let first = f.ridge.first()?.0;
    let last = f.ridge.last()?.0;
    if column < first || column > last {
        return None;
    }
    for w in f.ridge.windows(2) {
        let ((c0, y0), (c1, y1)) = (w[0], w[1]);
        if column == c0 {
            return Some(y0);
        }
        if column > c0 && column < c1 {
            let s = (column - c0) as f64 / (c1 - c0) as f64;
            return Some(y0 + s * (y1 - y0));
        }
    }
    Some(f.ridge.last()?.1)
}

/// Brute-force shift scoring: every extremum against every figure.
pub fn rescore_oracle(
    extrema: &[Extremum],
    figures: &[CharacteristicFigure],
    range: f64,
    tau: f64,
    delta: f64,
) -> usize {
    let mut count = 0;
    for e in extrema {
        let y = e.ordinate + delta * range;
        let want = if e.kind == ExtremumKind::Max { Side::Upper } else { Side::Lower };
        let mut best_any = f64::INFINITY;
        let mut best_side = f64::INFINITY;
        for f in figures {
            if let Some(r) = ridge_at(f, e.index) {
                let d = (y - r).abs() / range;
                best_any = best_any.min(d);
                if f.side == want {
                    best_side = best_side.min(d);
                }
            }
        }
        if best_side <= tau || best_any <= tau {
            count += 1;
        }
    }
    count
}

/// Exact `P[Binomial(n, eps) >= k]` with `eps` taken as its exact binary value.
pub fn exact_binomial_tail(n: u64, k: u64, eps: f64) -> f64 {
    let p = BigRational::from_float(eps).expect("finite eps");
    let q = BigRational::one() - &p;
    let mut total = BigRational::zero();
    for j in k..=n {
        let mut c = BigInt::one();
        for i in 0..j {
            c = c * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        total += BigRational::from_integer(c) * pow(&p, j) * pow(&q, n - j);
    }
    total.to_f64().expect("representable")
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

/// Last-point value of the order-`d` least-squares polynomial over `window`,
/// by dense QR on the Vandermonde matrix with abscissas scaled to `[-1, 1]`.
pub fn dense_last_point(window: &[f64], d: usize) -> f64 {
    let n = window.len();
    let h = (n - 1) as f64 / 2.0;
    let x = DMatrix::from_fn(n, d + 1, |i, j| ((i as f64 - h) / h).powi(j as i32));
    let y = DVector::from_column_slice(window);
    let qr = x.qr();
    let qty = qr.q().transpose() * y;
    let r = qr.r();
    let beta = r.solve_upper_triangular(&qty).expect("full rank");
    beta.iter().sum()
}

/// Style of the golden fixture image.
pub fn golden_style() -> RenderStyle {
    RenderStyle {
        width: 960,
        height: 540,
        ..Default::default()
    }
}
