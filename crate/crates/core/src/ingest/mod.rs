//! Tick loading and bar aggregation.
//!
//! Bars carry a symmetric band `M ± d`: `M` is the midrange of the grouped
//! tick values and `d` the half-range, so `H = M + d` is the group maximum
//! and `L = M - d` the group minimum. Only `M` is ever fed to the regressions.

mod cache;
mod surrogate;

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{read_bar_cache, write_bar_cache, BAR_CACHE_MAGIC, BAR_CACHE_VERSION};
pub use surrogate::{make_surrogate, SurrogateMethod};

/// Minimum series length accepted by [`make_surrogate`].
pub const MIN_SURROGATE_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("timestamp decreases at line {line}")]
    NonMonotonicTimestamp { line: u64 },
    #[error("no ticks to aggregate")]
    EmptyInput,
    #[error("invalid aggregation parameter: {0}")]
    InvalidParameter(String),
    #[error("series too short: need {needed} bars, have {available}")]
    SeriesTooShort { needed: usize, available: usize },
    #[error("bar cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One traded price. Timestamps are integer epoch milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub timestamp: i64,
    pub value: f64,
    pub volume: f64,
}

/// An aggregated group of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub index: usize,
    pub t_start: i64,
    pub t_end: i64,
    /// Midpoint `M`.
    pub m: f64,
    /// Half-range `d`, never negative.
    pub d: f64,
    pub volume: f64,
}

impl Bar {
    /// `H = M + d`
    pub fn high(&self) -> f64 {
        self.m + self.d
    }

    /// `L = M - d`
    pub fn low(&self) -> f64 {
        self.m - self.d
    }
}

/// How the bars of a series were formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Granularity {
    /// Fixed time period in milliseconds.
    Time { period_ms: i64 },
    /// Normalized volume bars with the given quota.
    Volume { quota: f64 },
    /// One bar per input value (arbitrary series, no aggregation).
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    pub bars: Vec<Bar>,
    pub granularity: Granularity,
}

impl BarSeries {
    /// Wraps a plain value series as point bars (`d = 0`).
    pub fn from_values(values: &[f64]) -> Self {
        let bars = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Bar {
                index: i,
                t_start: i as i64,
                t_end: i as i64 + 1,
                m: v,
                d: 0.0,
                volume: 0.0,
            })
            .collect();
        Self {
            bars,
            granularity: Granularity::Raw,
        }
    }

    /// Builds point-free bars from `(M, d)` pairs.
    pub fn from_mid_half_range(pairs: &[(f64, f64)]) -> Self {
        let bars = pairs
            .iter()
            .enumerate()
            .map(|(i, &(m, d))| Bar {
                index: i,
                t_start: i as i64,
                t_end: i as i64 + 1,
                m,
                d: d.abs(),
                volume: 0.0,
            })
            .collect();
        Self {
            bars,
            granularity: Granularity::Raw,
        }
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// The `M` values, the only input the regressions ever see.
    pub fn mids(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.m).collect()
    }

    /// Bars whose period has closed at or before `date` (epoch ms).
    pub fn until(&self, date: i64) -> BarSeries {
        let end = self.bars.partition_point(|b| b.t_end <= date);
        self.range(0, end)
    }

    /// Bars `[start, end)`, re-indexed from zero.
    pub fn range(&self, start: usize, end: usize) -> BarSeries {
        let end = end.min(self.bars.len());
        let start = start.min(end);
        let bars = self.bars[start..end]
            .iter()
            .enumerate()
            .map(|(i, b)| Bar { index: i, ..*b })
            .collect();
        BarSeries {
            bars,
            granularity: self.granularity,
        }
    }

    /// Same bars with every ordinate mapped through `alpha * x + beta`.
    ///
    /// `alpha` must be positive so that `H` stays above `L`.
    pub fn affine(&self, alpha: f64, beta: f64) -> BarSeries {
        let bars = self
            .bars
            .iter()
            .map(|b| Bar {
                m: alpha * b.m + beta,
                d: alpha.abs() * b.d,
                ..*b
            })
            .collect();
        BarSeries {
            bars,
            granularity: self.granularity,
        }
    }
}

/// Which CSV column holds a field: by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub timestamp: Column,
    pub value: Column,
    pub volume: Column,
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            timestamp: Column::Name("timestamp".into()),
            value: Column::Name("value".into()),
            volume: Column::Name("volume".into()),
            has_header: true,
            delimiter: b',',
        }
    }
}

/// Group midpoint convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MidpointMode {
    /// `M = (max + min) / 2`, `d = (max - min) / 2`.
    #[default]
    Midrange,
    /// `M` is the volume-weighted mean; `d` is widened to cover both the group
    /// maximum and minimum, so the band is no longer tight on both sides.
    VolumeWeighted,
}

fn resolve_column(col: &Column, headers: Option<&csv::StringRecord>) -> Result<usize, IngestError> {
    match col {
        Column::Index(i) => Ok(*i),
        Column::Name(name) => headers
            .and_then(|h| h.iter().position(|f| f.trim() == name))
            .ok_or_else(|| IngestError::MalformedRow {
                line: 1,
                reason: format!("missing column `{name}`"),
            }),
    }
}

/// Reads ticks from CSV. Rows must be in non-decreasing timestamp order.
pub fn load_ticks<R: Read>(source: R, format: &CsvFormat) -> Result<Vec<Tick>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(format.has_header)
        .delimiter(format.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = if format.has_header {
        Some(reader.headers().map_err(csv_error)?.clone())
    } else {
        None
    };
    let ts_col = resolve_column(&format.timestamp, headers.as_ref())?;
    let value_col = resolve_column(&format.value, headers.as_ref())?;
    let volume_col = resolve_column(&format.volume, headers.as_ref())?;

    let mut ticks = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, what: &str| -> Result<&str, IngestError> {
            record.get(idx).ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: format!("missing {what} field"),
            })
        };
        let timestamp: i64 = field(ts_col, "timestamp")?.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: "timestamp is not an integer".into(),
        })?;
        let value: f64 = parse_decimal(field(value_col, "value")?, line, "value")?;
        let volume: f64 = parse_decimal(field(volume_col, "volume")?, line, "volume")?;
        if !value.is_finite() {
            return Err(IngestError::MalformedRow {
                line,
                reason: "value is not finite".into(),
            });
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("volume {volume} is not a non-negative number"),
            });
        }
        if let Some(prev) = ticks.last().map(|t: &Tick| t.timestamp) {
            if timestamp < prev {
                return Err(IngestError::NonMonotonicTimestamp { line });
            }
        }
        ticks.push(Tick {
            timestamp,
            value,
            volume,
        });
    }
    Ok(ticks)
}

fn parse_decimal(raw: &str, line: u64, what: &str) -> Result<f64, IngestError> {
    raw.parse().map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("{what} `{raw}` is not a number"),
    })
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

/// Accumulates one group of ticks into a bar.
struct Group {
    t_start: i64,
    t_end: i64,
    max: f64,
    min: f64,
    volume: f64,
    weighted: f64,
}

impl Group {
    fn new(tick: &Tick, t_start: i64) -> Self {
        Self {
            t_start,
            t_end: tick.timestamp,
            max: tick.value,
            min: tick.value,
            volume: tick.volume,
            weighted: tick.value * tick.volume,
        }
    }

    fn push(&mut self, tick: &Tick) {
        self.max = self.max.max(tick.value);
        self.min = self.min.min(tick.value);
        self.volume += tick.volume;
        self.weighted += tick.value * tick.volume;
        self.t_end = tick.timestamp;
    }

    fn finish(&self, index: usize, t_end: i64, mode: MidpointMode) -> Bar {
        let (m, d) = match mode {
            MidpointMode::Midrange => ((self.max + self.min) / 2.0, (self.max - self.min) / 2.0),
            MidpointMode::VolumeWeighted => {
                let m = if self.volume > 0.0 {
                    (self.weighted / self.volume).clamp(self.min, self.max)
                } else {
                    (self.max + self.min) / 2.0
                };
                (m, (self.max - m).max(m - self.min))
            }
        };
        Bar {
            index,
            t_start: self.t_start,
            t_end,
            m,
            d,
            volume: self.volume,
        }
    }
}

/// Time bars over epoch-aligned periods of `period_ms`. Empty periods emit no bar.
pub fn aggregate_time_bars(ticks: &[Tick], period_ms: i64) -> Result<BarSeries, IngestError> {
    aggregate_time_bars_with(ticks, period_ms, MidpointMode::Midrange)
}

pub fn aggregate_time_bars_with(
    ticks: &[Tick],
    period_ms: i64,
    mode: MidpointMode,
) -> Result<BarSeries, IngestError> {
    if period_ms <= 0 {
        return Err(IngestError::InvalidParameter(format!("period {period_ms} must be positive")));
    }
    if ticks.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut bars = Vec::new();
    let mut current: Option<(i64, Group)> = None;
    for tick in ticks {
        let bucket = tick.timestamp.div_euclid(period_ms);
        match current.as_mut() {
            Some((b, group)) if *b == bucket => group.push(tick),
            _ => {
                if let Some((b, group)) = current.take() {
                    bars.push(group.finish(bars.len(), (b + 1) * period_ms, mode));
                }
                current = Some((bucket, Group::new(tick, bucket * period_ms)));
            }
        }
    }
    if let Some((b, group)) = current {
        bars.push(group.finish(bars.len(), (b + 1) * period_ms, mode));
    }
    Ok(BarSeries {
        bars,
        granularity: Granularity::Time { period_ms },
    })
}

/// Normalized volume bars: ticks are grouped until the cumulative volume of
/// the group reaches `quota`. A trailing group below quota is still emitted
/// so that bar volumes always sum to the tick volumes.
pub fn aggregate_nvb(ticks: &[Tick], quota: f64) -> Result<BarSeries, IngestError> {
    aggregate_nvb_with(ticks, quota, MidpointMode::Midrange)
}

pub fn aggregate_nvb_with(ticks: &[Tick], quota: f64, mode: MidpointMode) -> Result<BarSeries, IngestError> {
    if !(quota > 0.0) || !quota.is_finite() {
        return Err(IngestError::InvalidParameter(format!("quota {quota} must be positive")));
    }
    if ticks.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut bars = Vec::new();
    let mut current: Option<Group> = None;
    for tick in ticks {
        let group = match current.as_mut() {
            Some(g) => {
                g.push(tick);
                g
            }
            None => current.insert(Group::new(tick, tick.timestamp)),
        };
        if group.volume >= quota {
            let t_end = group.t_end;
            bars.push(group.finish(bars.len(), t_end, mode));
            current = None;
        }
    }
    if let Some(group) = current {
        bars.push(group.finish(bars.len(), group.t_end, mode));
    }
    Ok(BarSeries {
        bars,
        granularity: Granularity::Volume { quota },
    })
}

/// Median positive spacing between tick timestamps, if any.
pub fn median_tick_spacing(ticks: &[Tick]) -> Option<i64> {
    let mut gaps: Vec<i64> = ticks
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .filter(|&g| g > 0)
        .collect();
    if gaps.is_empty() {
        return None;
    }
    let mid = gaps.len() / 2;
    Some(*gaps.select_nth_unstable(mid).1)
}
