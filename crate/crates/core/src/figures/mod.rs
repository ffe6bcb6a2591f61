//! Characteristic figures: dense formations of the curve bundle.
//!
//! The bundle is rasterized into a [`DensityField`] (bar columns by price
//! rows). Cords are linked per-column density peaks, envelopes are hard,
//! smooth quantile boundaries of the bundle, and a boltrope is a cord lying
//! on an envelope. All thresholds live in [`FigureParams`].

mod detect;
mod extrapolate;
mod field;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::detect_figures;
pub use extrapolate::extrapolate_figure;
pub use field::{density_field, DensityField, FieldOptions, Splat, ViewWindow};

#[derive(Debug, Error, PartialEq)]
pub enum FigureError {
    #[error("empty view window")]
    EmptyView,
    #[error("invalid figure parameter: {0}")]
    InvalidParams(String),
    #[error("figure spans {span} columns, need at least {needed}")]
    SpanTooShort { span: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureKind {
    Boltrope,
    Cord,
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFigure {
    /// Position in the markedness ordering of its detection run.
    pub id: usize,
    pub kind: FigureKind,
    pub side: Side,
    /// `(bar index, ordinate)` vertices with strictly increasing bar index.
    pub ridge: Vec<(usize, f64)>,
    /// Mean excess density along the ridge. Grid-relative: only its ranking
    /// is meaningful across charts.
    pub markedness: f64,
    /// Column extent, `last - first + 1`.
    pub span: usize,
    /// Whether most of the ridge density comes from short curves; `None`
    /// when the field was built without per-rank attribution.
    pub short: Option<bool>,
}

impl CharacteristicFigure {
    pub fn first_column(&self) -> usize {
        self.ridge[0].0
    }

    pub fn last_column(&self) -> usize {
        self.ridge[self.ridge.len() - 1].0
    }

    /// Ridge ordinate at `column`, linear between vertices.
    pub fn ordinate_at(&self, column: f64) -> Option<f64> {
        let first = self.first_column() as f64;
        let last = self.last_column() as f64;
        if column < first || column > last {
            return None;
        }
        let i = self.ridge.partition_point(|&(c, _)| (c as f64) < column);
        if i < self.ridge.len() && self.ridge[i].0 as f64 == column {
            return Some(self.ridge[i].1);
        }
        let (c0, y0) = self.ridge[i - 1];
        let (c1, y1) = self.ridge[i];
        let f = (column - c0 as f64) / (c1 - c0) as f64;
        Some(y0 + f * (y1 - y0))
    }

    pub fn mean_ordinate(&self) -> f64 {
        self.ridge.iter().map(|&(_, y)| y).sum::<f64>() / self.ridge.len() as f64
    }
}

/// Detection thresholds. Figures have no quantitative definition beyond
/// their appearance, so every knob here is an operational choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureParams {
    /// Price bins `R` of the density field.
    pub rows: usize,
    /// A cord's peaks must mostly exceed this multiple of the column median.
    pub prominence: f64,
    /// Largest row jump per column when linking peaks.
    pub max_jump: usize,
    /// Columns that may be missing inside a linked ridge.
    pub max_gap: usize,
    /// Minimum span as a fraction of the view's columns.
    pub min_span_fraction: f64,
    /// Mass quantile `q` locating the bundle boundaries.
    pub quantile: f64,
    /// Boundary band width and cord-to-envelope proximity `zeta`, in rows.
    pub boltrope_proximity: usize,
    /// Largest absolute second difference (rows per column squared) of an
    /// envelope track.
    pub curvature_bound: f64,
    /// Gaussian smoothing along the price axis before peak search, in rows.
    pub smoothing: f64,
}

impl Default for FigureParams {
    fn default() -> Self {
        Self {
            rows: 512,
            prominence: 2.0,
            max_jump: 2,
            max_gap: 2,
            min_span_fraction: 0.05,
            quantile: 0.02,
            boltrope_proximity: 3,
            curvature_bound: 2.0,
            smoothing: 1.0,
        }
    }
}

impl FigureParams {
    pub fn validate(&self) -> Result<(), FigureError> {
        let bad = |what: &str| Err(FigureError::InvalidParams(what.to_string()));
        if self.rows < 64 {
            return bad("rows must be at least 64");
        }
        if !(self.prominence > 0.0) {
            return bad("prominence must be positive");
        }
        if self.max_jump == 0 {
            return bad("max_jump must be positive");
        }
        if !(self.min_span_fraction > 0.0 && self.min_span_fraction <= 1.0) {
            return bad("min_span_fraction must be in (0, 1]");
        }
        if !(self.quantile > 0.0 && self.quantile < 0.5) {
            return bad("quantile must be in (0, 0.5)");
        }
        if self.boltrope_proximity == 0 {
            return bad("boltrope_proximity must be positive");
        }
        if !(self.curvature_bound > 0.0) {
            return bad("curvature_bound must be positive");
        }
        if !(self.smoothing >= 0.0) {
            return bad("smoothing must be non-negative");
        }
        Ok(())
    }

    /// Minimum span in columns for a view of `columns` columns.
    pub fn min_span(&self, columns: usize) -> usize {
        ((self.min_span_fraction * columns as f64).ceil() as usize).max(2)
    }
}
