use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FigureError;
use crate::network::Network;

/// Bar columns `[from, to)` of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewWindow {
    pub from: usize,
    pub to: usize,
}

impl ViewWindow {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }

    pub fn columns(&self) -> usize {
        self.to.saturating_sub(self.from)
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.from..self.to).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splat {
    /// Unit mass into the bin containing the ordinate.
    Off,
    /// Unit mass split linearly between the two nearest bin centres.
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldOptions {
    pub splat: Splat,
    /// Price bounds of the grid. Defaults to the curve ordinate range.
    pub bounds: Option<(f64, f64)>,
    /// Also accumulate a separate field for ranks `k` with `3k < N`.
    pub rank_split: bool,
}

/// Curve coverage over bar columns and price rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    window: ViewWindow,
    rows: usize,
    lo: f64,
    hi: f64,
    /// Column-major: `cells[c * rows + r]`.
    cells: Vec<f64>,
    curves_per_column: Vec<usize>,
    short_cells: Option<Vec<f64>>,
}

/// Fractional row position quantum; keeps bin assignment stable under
/// affine rescaling of prices.
const POSITION_QUANTUM: f64 = 65536.0;

impl DensityField {
    /// Wraps precomputed column-major cells (for synthetic fields).
    pub fn from_cells(window: ViewWindow, rows: usize, lo: f64, hi: f64, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), window.columns() * rows);
        let curves_per_column = vec![0; window.columns()];
        Self {
            window,
            rows,
            lo,
            hi,
            cells,
            curves_per_column,
            short_cells: None,
        }
    }

    pub fn window(&self) -> ViewWindow {
        self.window
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.window.columns()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.cells[c * self.rows..(c + 1) * self.rows]
    }

    pub fn short_column(&self, c: usize) -> Option<&[f64]> {
        self.short_cells.as_ref().map(|s| &s[c * self.rows..(c + 1) * self.rows])
    }

    pub fn get(&self, c: usize, r: usize) -> f64 {
        self.cells[c * self.rows + r]
    }

    pub fn curves_at(&self, c: usize) -> usize {
        self.curves_per_column[c]
    }

    pub fn column_mass(&self, c: usize) -> f64 {
        self.column(c).iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&v| v == 0.0)
    }

    /// Price of a fractional row position measured from the bottom edge.
    pub fn ordinate_of(&self, row_position: f64) -> f64 {
        self.lo + row_position / self.rows as f64 * (self.hi - self.lo)
    }

    /// Fractional row position (bottom edge = 0) of a price.
    pub fn position_of(&self, ordinate: f64) -> f64 {
        (ordinate - self.lo) / (self.hi - self.lo) * self.rows as f64
    }

    fn splat(&self, column: &mut [f64], y: f64, splat: Splat) {
        let rows = self.rows;
        let pos = self.position_of(y);
        match splat {
            Splat::Off => {
                let r = (pos.floor().max(0.0) as usize).min(rows - 1);
                column[r] += 1.0;
            }
            Splat::Linear => {
                let pos = (pos * POSITION_QUANTUM).round() / POSITION_QUANTUM - 0.5;
                let base = pos.floor();
                let frac = pos - base;
                let clamp = |r: f64| (r.max(0.0) as usize).min(rows - 1);
                column[clamp(base)] += 1.0 - frac;
                column[clamp(base + 1.0)] += frac;
            }
        }
    }
}

/// Rasterizes the curves of `network` over `window` into `rows` price bins.
pub fn density_field(
    network: &Network,
    window: ViewWindow,
    rows: usize,
    options: FieldOptions,
) -> Result<DensityField, FigureError> {
    if rows < 64 {
        return Err(FigureError::InvalidParams(format!("rows {rows} below 64")));
    }
    let to = window.to.min(network.len());
    if window.from >= to {
        return Err(FigureError::EmptyView);
    }
    let window = ViewWindow::new(window.from, to);
    let curves = network.curves();
    let (mut lo, mut hi) = match options.bounds {
        Some(b) => b,
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for c in curves {
                for t in window.from.max(c.start())..to {
                    let v = c.values[t - c.start()];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            (lo, hi)
        }
    };
    if !lo.is_finite() || !hi.is_finite() {
        return Err(FigureError::EmptyView);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    let count = network.schedule().count;
    let mut field = DensityField {
        window,
        rows,
        lo,
        hi,
        cells: vec![0.0; window.columns() * rows],
        curves_per_column: (window.from..to).map(|t| network.defined_at(t)).collect(),
        short_cells: options.rank_split.then(|| vec![0.0; window.columns() * rows]),
    };
    // Columns accumulate independently in rank order, so the result does not
    // depend on the thread count.
    let mut cells = std::mem::take(&mut field.cells);
    let mut short = field.short_cells.take();
    {
        let f = &field;
        let fill = |(c, column): (usize, &mut [f64]), short_column: Option<&mut [f64]>| {
            let t = window.from + c;
            let defined = f.curves_per_column[c];
            let mut short_column = short_column;
            for curve in &curves[..defined] {
                let y = curve.values[t - curve.start()];
                f.splat(column, y, options.splat);
                if let Some(sc) = short_column.as_deref_mut() {
                    if 3 * curve.rank < count {
                        f.splat(sc, y, options.splat);
                    }
                }
            }
        };
        match short.as_mut() {
            Some(s) => cells
                .par_chunks_mut(rows)
                .zip(s.par_chunks_mut(rows))
                .enumerate()
                .for_each(|(c, (col, sc))| fill((c, col), Some(sc))),
            None => cells
                .par_chunks_mut(rows)
                .enumerate()
                .for_each(|(c, col)| fill((c, col), None)),
        }
    }
    field.cells = cells;
    field.short_cells = short;
    if field.curves_per_column.iter().all(|&n| n == 0) {
        return Err(FigureError::EmptyView);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::CurveSchedule;

    fn network(values: Vec<f64>, schedule: CurveSchedule) -> Network {
        Network::from_mids(values, schedule).unwrap()
    }

    fn wavy(n: usize) -> Vec<f64> {
        (0..n).map(|t| 20.0 + (t as f64 * 0.13).sin() * 3.0 + (t as f64 * 0.031).cos() * 5.0).collect()
    }

    #[test]
    fn per_column_mass_equals_curve_count() {
        let schedule = CurveSchedule::new(2, 30, 5, 100, 1.0).unwrap();
        let net = network(wavy(220), schedule);
        for splat in [Splat::Off, Splat::Linear] {
            let opts = FieldOptions { splat, ..Default::default() };
            let field = density_field(&net, ViewWindow::new(50, 220), 128, opts).unwrap();
            for c in 0..field.columns() {
                let expected = net.defined_at(50 + c) as f64;
                assert!((field.column_mass(c) - expected).abs() < 1e-6);
                assert_eq!(field.curves_at(c), net.defined_at(50 + c));
            }
        }
    }

    #[test]
    fn single_curve_field() {
        let schedule = CurveSchedule {
            order: 1,
            count: 2,
            first: 3,
            last: 400,
            spacing: 1.0,
            windows: vec![3, 400],
        };
        let net = network(wavy(100), schedule);
        let field = density_field(&net, ViewWindow::new(10, 100), 64, FieldOptions::default()).unwrap();
        for c in 0..field.columns() {
            let y = net.curves()[0].value_at(10 + c).unwrap();
            let pos = field.position_of(y);
            let nonzero: Vec<usize> = (0..64).filter(|&r| field.get(c, r) > 0.0).collect();
            assert!(!nonzero.is_empty() && nonzero.len() <= 2);
            for r in nonzero {
                assert!((r as f64 + 0.5 - pos).abs() <= 1.0 + 1e-9);
            }
            assert!((field.column_mass(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_curves_scale_additively() {
        let values = wavy(80);
        let single = CurveSchedule {
            order: 2,
            count: 2,
            first: 9,
            last: 500,
            spacing: 0.0,
            windows: vec![9, 500],
        };
        let many = CurveSchedule {
            windows: vec![9; 7],
            count: 7,
            ..single.clone()
        };
        let a = network(values.clone(), single);
        let b = network(values, many);
        let w = ViewWindow::new(20, 80);
        let fa = density_field(&a, w, 64, FieldOptions::default()).unwrap();
        let fb = density_field(&b, w, 64, FieldOptions::default()).unwrap();
        for c in 0..fa.columns() {
            let ma = fa.column(c).iter().cloned().fold(0.0, f64::max);
            let mb = fb.column(c).iter().cloned().fold(0.0, f64::max);
            assert!((mb - 7.0 * ma).abs() < 1e-9);
        }
    }

    #[test]
    fn splat_off_matches_bin_counting() {
        let schedule = CurveSchedule::new(3, 50, 6, 150, 1.0).unwrap();
        let net = network(wavy(300), schedule);
        let w = ViewWindow::new(149, 300);
        let opts = FieldOptions {
            splat: Splat::Off,
            ..Default::default()
        };
        let field = density_field(&net, w, 100, opts).unwrap();
        let (lo, hi) = field.bounds();
        for c in 0..field.columns() {
            let mut counts = [0.0f64; 100];
            for curve in net.curves() {
                if let Some(y) = curve.value_at(149 + c) {
                    let mut bin = 0;
                    while bin + 1 < 100 && y >= lo + (bin + 1) as f64 * (hi - lo) / 100.0 {
                        bin += 1;
                    }
                    counts[bin] += 1.0;
                }
            }
            assert_eq!(field.column(c), &counts[..]);
        }
    }

    #[test]
    fn rank_split_attributes_short_curves() {
        let schedule = CurveSchedule::new(1, 9, 3, 60, 1.0).unwrap();
        let net = network(wavy(100), schedule);
        let opts = FieldOptions {
            rank_split: true,
            ..Default::default()
        };
        let field = density_field(&net, ViewWindow::new(60, 100), 64, opts).unwrap();
        // ranks 1 and 2 satisfy 3k < 9
        let short_mass: f64 = field.short_column(0).unwrap().iter().sum();
        assert!((short_mass - 2.0).abs() < 1e-9);
    }

    #[test]
    fn thread_count_does_not_change_field() {
        let schedule = CurveSchedule::new(2, 60, 5, 120, 1.0).unwrap();
        let net = network(wavy(260), schedule);
        let w = ViewWindow::new(100, 260);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| density_field(&net, w, 256, FieldOptions::default()).unwrap());
        let b = density_field(&net, w, 256, FieldOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_view_rejected() {
        let schedule = CurveSchedule::new(1, 3, 3, 20, 1.0).unwrap();
        let net = network(wavy(40), schedule);
        assert_eq!(
            density_field(&net, ViewWindow::new(30, 30), 64, FieldOptions::default()).unwrap_err(),
            FigureError::EmptyView
        );
        // no curve defined before bar 2
        assert_eq!(
            density_field(&net, ViewWindow::new(0, 2), 64, FieldOptions::default()).unwrap_err(),
            FigureError::EmptyView
        );
    }
}
