//! Moving polynomial regression networks over price series.
//!
//! A network is a bundle of `N` moving regressions of order `D`, each over a
//! different trailing window length. Dense formations inside the bundle
//! ("characteristic figures") are extracted from a rasterized density field
//! and scored against the local extrema of the underlying price. The
//! [`validate`] module wraps all of this into reproducible falsification
//! runs: shift tests, batch qualification protocols and surrogate controls.
//!
//! Pipeline, bottom up:
//!
//! * [`ingest`]: ticks, time bars, normalized volume bars, surrogate series.
//! * [`regress`]: window schedules and incremental last-point regression.
//! * [`network`]: curve bundles, slices, binary/JSON export.
//! * [`figures`]: density field, cords/envelopes/boltropes, extrapolation.
//! * [`interact`]: extrema, interaction scoring, chart qualification.
//! * [`validate`]: charts, shift test, protocols, surrogates, overlap.
//! * [`render`]: deterministic PNG and SVG charts.

pub mod figures;
pub mod ingest;
pub mod interact;
mod linalg;
pub mod network;
pub mod regress;
pub mod render;
pub mod synth;
pub mod validate;

pub use interact::{Extremum, ExtremumKind, Interaction, QualificationResult, Verdict};
pub use figures::{CharacteristicFigure, DensityField, FigureKind, FigureParams, Side};
pub use ingest::{Bar, BarSeries, Granularity, Tick};

pub use network::{Network, NetworkSlice};
pub use regress::CurveSchedule;
