//! Falsification harness.
//!
//! Figures are derived from the same prices they are scored against, so a
//! high interaction count on its own says little. The harness therefore
//! measures several things side by side and asserts none of them:
//!
//! * the shift test: interaction counts with prices displaced vertically;
//! * the batch protocols (simultaneity, totality, consecutiveness) with
//!   binomial tail probabilities under a chance-qualification rate `eps`;
//! * real versus surrogate qualification rates through the identical
//!   pipeline;
//! * figure overlap between representations or subtypes.

mod chart;
mod overlap;
mod protocol;
mod shift;
pub mod stats;
mod surrogate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::figures::{FigureError, FigureParams};
use crate::ingest::{IngestError, Tick};
use crate::interact::{DEFAULT_MIN_EXTREMA, DEFAULT_QUALIFICATION_THRESHOLD};
use crate::network::NetworkError;
use crate::regress::{CurveSchedule, RegressError};

pub use chart::{analyze_window, build_chart, chart_bars, markedness_amplitude_pairs, Chart, ChartLabel};
pub use overlap::{topology_overlap, ColumnMap};
pub use protocol::{
    consecutive_windows, run_consecutiveness, run_simultaneity, run_totality, ChartVerdict, EpsilonPValue, Protocol,
    ProtocolReport, SkippedChart,
    INDEPENDENCE_ASSUMPTION, TOTALITY_RESOLUTIONS_MINUTES,
};
pub use shift::{shift_test, ShiftTestResult};
pub use surrogate::{
    surrogate_comparison, MethodSummary, RateSummary, SeedOutcome, SurrogateReport, MIN_SURROGATE_SEEDS,
};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("insufficient history for {instrument}: {reason}")]
    InsufficientHistory { instrument: String, reason: String },
    #[error("protocol needs at least 2 instruments, got {0}")]
    UniverseTooSmall(usize),
    #[error("need at least {needed} seeds per method, got {got}")]
    TooFewSeeds { needed: usize, got: usize },
    #[error("series too short: need {needed} bars, have {available}")]
    SeriesTooShort { needed: usize, available: usize },
    #[error("figure set {0} is empty")]
    EmptyFigureSet(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Figure(#[from] FigureError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Regress(#[from] RegressError),
}

impl ValidateError {
    /// True for the errors a cross-sectional protocol records and skips.
    pub fn is_insufficient_history(&self) -> bool {
        matches!(self, Self::InsufficientHistory { .. })
    }
}

/// A named tick history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    pub symbol: String,
    pub ticks: Vec<Tick>,
}

/// Window schedule parameters for one subtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub order: usize,
    pub count: usize,
    pub first: usize,
    pub last: usize,
    pub spacing: f64,
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<CurveSchedule, RegressError> {
        CurveSchedule::new(self.order, self.count, self.first, self.last, self.spacing)
    }

    /// Default `TN1`..`TN5` presets: 600 curves, spacing 2, windows from
    /// `D + 4` to `1500 D`.
    pub fn default_presets() -> Vec<ScheduleSpec> {
        (1..=5)
            .map(|d| ScheduleSpec {
                order: d,
                count: 600,
                first: d + 4,
                last: 1500 * d,
                spacing: 2.0,
            })
            .collect()
    }
}

/// Everything that shapes a chart's verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartConfig {
    /// Bars shown per chart.
    pub view_bars: usize,
    /// Require every curve to be defined across the view.
    pub require_full_network: bool,
    pub figures: FigureParams,
    /// Interaction tolerance as a fraction of the view price range.
    pub tau: f64,
    /// Extremum prominence as a fraction of the view price range.
    pub prominence: f64,
    pub min_separation: usize,
    pub qualification_threshold: f64,
    pub min_extrema: usize,
    /// Attribute field density to short curves (ranks `k < N/3`).
    pub rank_split: bool,
    pub schedules: Vec<ScheduleSpec>,
    /// Chance-qualification rates at which every report states p-values.
    pub epsilons: Vec<f64>,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            view_bars: 300,
            require_full_network: true,
            figures: FigureParams::default(),
            tau: 0.02,
            prominence: 0.005,
            min_separation: 3,
            qualification_threshold: DEFAULT_QUALIFICATION_THRESHOLD,
            min_extrema: DEFAULT_MIN_EXTREMA,
            rank_split: true,
            schedules: ScheduleSpec::default_presets(),
            epsilons: vec![0.1, 0.01, 0.001],
        }
    }
}

impl ChartConfig {
    /// Schedule of subtype `TN<order>`.
    pub fn schedule(&self, order: usize) -> Result<CurveSchedule, ValidateError> {
        let spec = self
            .schedules
            .iter()
            .find(|s| s.order == order)
            .ok_or_else(|| ValidateError::InvalidConfig(format!("no schedule for TN{order}")))?;
        Ok(spec.resolve()?)
    }

    /// Orders with a configured schedule, ascending.
    pub fn subtypes(&self) -> Vec<usize> {
        let mut orders: Vec<usize> = self.schedules.iter().map(|s| s.order).collect();
        orders.sort_unstable();
        orders.dedup();
        orders
    }

    pub fn validate(&self) -> Result<(), ValidateError> {
        self.figures.validate()?;
        if self.view_bars < 3 {
            return Err(ValidateError::InvalidConfig("view_bars must be at least 3".into()));
        }
        if !(self.tau >= 0.0) || !(self.prominence >= 0.0) {
            return Err(ValidateError::InvalidConfig("tau and prominence must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.qualification_threshold) {
            return Err(ValidateError::InvalidConfig("qualification_threshold must be in [0, 1]".into()));
        }
        if self.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(ValidateError::InvalidConfig("epsilons must be in [0, 1]".into()));
        }
        for s in &self.schedules {
            s.resolve()?;
        }
        Ok(())
    }

    /// Bars needed for one chart of subtype `order` (history plus view).
    pub fn bars_needed(&self, order: usize, windows: usize) -> Result<usize, ValidateError> {
        let schedule = self.schedule(order)?;
        let history = if self.require_full_network {
            schedule.max_window() - 1
        } else {
            schedule.min_window()
        };
        Ok(history + windows * self.view_bars)
    }
}
