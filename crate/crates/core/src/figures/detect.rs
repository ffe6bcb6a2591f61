use std::cmp::Ordering;

use rayon::prelude::*;

use super::field::DensityField;
use super::{CharacteristicFigure, FigureKind, FigureParams, Side};

/// Per-column statistics used by both cord and envelope detection.
struct ColumnStats {
    median: f64,
    peaks: Vec<Peak>,
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    /// Fractional row position of the crest, bottom edge = 0.
    position: f64,
    density: f64,
}

#[derive(Debug, Clone)]
struct Vertex {
    column: usize,
    position: f64,
    density: f64,
    median: f64,
}

#[derive(Debug, Default)]
struct Track {
    vertices: Vec<Vertex>,
}

impl Track {
    fn last(&self) -> &Vertex {
        self.vertices.last().expect("tracks are never empty")
    }

    fn span(&self) -> usize {
        self.last().column - self.vertices[0].column + 1
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn smooth(column: &[f64], kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return column.to_vec();
    }
    let radius = (kernel.len() / 2) as isize;
    let n = column.len() as isize;
    (0..n)
        .map(|r| {
            let mut acc = 0.0;
            let mut weight = 0.0;
            for (i, &w) in kernel.iter().enumerate() {
                let src = r + i as isize - radius;
                if (0..n).contains(&src) {
                    acc += w * column[src as usize];
                    weight += w;
                }
            }
            acc / weight
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn column_stats(raw: &[f64], kernel: &[f64]) -> ColumnStats {
    let smoothed = smooth(raw, kernel);
    let first = raw.iter().position(|&v| v > 0.0);
    let last = raw.iter().rposition(|&v| v > 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return ColumnStats {
            median: 0.0,
            peaks: Vec::new(),
        };
    };
    let median = median(&mut smoothed[first..=last].to_vec());
    let n = smoothed.len();
    let mut peaks = Vec::new();
    let mut r = 0;
    while r < n {
        // plateau [r, end]
        let mut end = r;
        while end + 1 < n && smoothed[end + 1] == smoothed[r] {
            end += 1;
        }
        let v = smoothed[r];
        let left_lower = r == 0 || smoothed[r - 1] < v;
        let right_lower = end + 1 == n || smoothed[end + 1] < v;
        let interior = r > 0 || end + 1 < n;
        if v > median && left_lower && right_lower && interior {
            let centre = (r + end) / 2;
            let offset = if r == end && r > 0 && r + 1 < n {
                let (a, b, c) = (smoothed[r - 1], v, smoothed[r + 1]);
                let denom = a - 2.0 * b + c;
                if denom < 0.0 {
                    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else if r != end {
                0.5 * ((r + end) % 2) as f64
            } else {
                0.0
            };
            peaks.push(Peak {
                position: centre as f64 + 0.5 + offset,
                density: v,
            });
        }
        r = end + 1;
    }
    ColumnStats { median, peaks }
}

/// Greedy nearest-row linking of per-column peaks into tracks.
fn link_peaks(stats: &[ColumnStats], params: &FigureParams) -> Vec<Track> {
    let mut open: Vec<Track> = Vec::new();
    let mut closed: Vec<Track> = Vec::new();
    for (c, col) in stats.iter().enumerate() {
        // retire tracks that can no longer be bridged
        let (keep, retire): (Vec<Track>, Vec<Track>) =
            open.into_iter().partition(|t| c - t.last().column <= params.max_gap + 1);
        closed.extend(retire);
        open = keep;

        let mut order: Vec<usize> = (0..col.peaks.len()).collect();
        order.sort_by(|&a, &b| {
            col.peaks[b]
                .density
                .total_cmp(&col.peaks[a].density)
                .then(col.peaks[a].position.total_cmp(&col.peaks[b].position))
        });
        let mut extended = vec![false; open.len()];
        let mut fresh = Vec::new();
        for i in order {
            let peak = col.peaks[i];
            let mut best: Option<(usize, f64)> = None;
            for (ti, track) in open.iter().enumerate() {
                if extended[ti] {
                    continue;
                }
                let last = track.last();
                let reach = (params.max_jump * (c - last.column)) as f64;
                let jump = (peak.position - last.position).abs();
                if jump <= reach && best.is_none_or(|(_, d)| jump < d) {
                    best = Some((ti, jump));
                }
            }
            let vertex = Vertex {
                column: c,
                position: peak.position,
                density: peak.density,
                median: col.median,
            };
            match best {
                Some((ti, _)) => {
                    extended[ti] = true;
                    open[ti].vertices.push(vertex);
                }
                None => fresh.push(Track { vertices: vec![vertex] }),
            }
        }
        open.extend(fresh);
    }
    closed.extend(open);
    closed
}

struct Boundary {
    /// Fractional row position per column; `None` where the boundary is soft
    /// or cannot be observed inside the grid.
    positions: Vec<Option<f64>>,
    excess: Vec<f64>,
}

/// Row position at which cumulative column mass reaches `fraction`.
fn mass_quantile(column: &[f64], fraction: f64) -> Option<f64> {
    let total: f64 = column.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (r, &v) in column.iter().enumerate() {
        if v > 0.0 && acc + v >= target {
            return Some(r as f64 + (target - acc) / v);
        }
        acc += v;
    }
    Some(column.len() as f64)
}

fn band_mean(column: &[f64], from: isize, to: isize) -> Option<f64> {
    if from < 0 || to as usize >= column.len() || from > to {
        return None;
    }
    let band = &column[from as usize..=to as usize];
    Some(band.iter().sum::<f64>() / band.len() as f64)
}

fn boundary(field: &DensityField, params: &FigureParams, side: Side) -> Boundary {
    let zeta = params.boltrope_proximity as isize;
    let mut positions = Vec::with_capacity(field.columns());
    let mut excess = Vec::with_capacity(field.columns());
    for c in 0..field.columns() {
        let column = field.column(c);
        let fraction = match side {
            Side::Upper => 1.0 - params.quantile,
            _ => params.quantile,
        };
        let Some(pos) = mass_quantile(column, fraction) else {
            positions.push(None);
            excess.push(0.0);
            continue;
        };
        let row = (pos.floor() as isize).min(column.len() as isize - 1);
        let (inner, outer) = match side {
            Side::Upper => (
                band_mean(column, row - zeta + 1, row),
                band_mean(column, row + zeta + 1, row + 2 * zeta),
            ),
            _ => (
                band_mean(column, row, row + zeta - 1),
                band_mean(column, row - 2 * zeta, row - zeta - 1),
            ),
        };
        match (inner, outer) {
            (Some(i), Some(o)) if i > 0.0 && o <= 0.5 * i => {
                positions.push(Some(pos));
                excess.push(i - o);
            }
            _ => {
                positions.push(None);
                excess.push(0.0);
            }
        }
    }
    Boundary { positions, excess }
}

/// Maximal runs of hard boundary columns whose second difference stays
/// within the curvature bound. A sharp kink removes its column from the run.
fn envelope_runs(b: &Boundary, params: &FigureParams) -> Vec<(usize, usize)> {
    let n = b.positions.len();
    let smooth_at = |c: usize| -> bool {
        let Some(q) = b.positions[c] else { return false };
        if c == 0 || c + 1 == n {
            return true;
        }
        match (b.positions[c - 1], b.positions[c + 1]) {
            (Some(p), Some(r)) => (p - 2.0 * q + r).abs() <= params.curvature_bound,
            _ => true,
        }
    };
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for c in 0..=n {
        let ok = c < n && smooth_at(c);
        match (start, ok) {
            (None, true) => start = Some(c),
            (Some(s), false) => {
                runs.push((s, c - 1));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

fn short_share(field: &DensityField, vertices: &[(usize, f64)]) -> Option<bool> {
    let mut short = 0.0;
    let mut total = 0.0;
    for &(c, pos) in vertices {
        let r = (pos.floor().max(0.0) as usize).min(field.rows() - 1);
        short += field.short_column(c)?[r];
        total += field.get(c, r);
    }
    (total > 0.0).then_some(short > 0.5 * total)
}

/// Extracts cords, envelopes and boltropes, sorted by descending markedness.
pub fn detect_figures(field: &DensityField, params: &FigureParams) -> Vec<CharacteristicFigure> {
    let columns = field.columns();
    if columns == 0 || field.is_empty() {
        return Vec::new();
    }
    let kernel = gaussian_kernel(params.smoothing);
    let stats: Vec<ColumnStats> = (0..columns)
        .into_par_iter()
        .map(|c| column_stats(field.column(c), &kernel))
        .collect();
    let min_span = params.min_span(columns);
    let from = field.window().from;

    // Cords: linked peaks, kept when long enough and mostly prominent.
    let mut cords: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for track in link_peaks(&stats, params) {
        let span = track.span();
        if span < min_span {
            continue;
        }
        let prominent = track
            .vertices
            .iter()
            .filter(|v| v.median <= 0.0 || v.density >= params.prominence * v.median)
            .count();
        if 2 * prominent <= track.vertices.len() {
            continue;
        }
        let excess: f64 = track.vertices.iter().map(|v| v.density - v.median).sum();
        let markedness = excess / span as f64;
        if markedness <= 0.0 {
            continue;
        }
        let vertices = track.vertices.iter().map(|v| (v.column, v.position)).collect();
        cords.push((vertices, markedness));
    }

    // Envelopes: hard, smooth quantile boundaries of the bundle.
    let mut envelopes: Vec<(Side, Vec<(usize, f64)>, f64)> = Vec::new();
    for side in [Side::Upper, Side::Lower] {
        let b = boundary(field, params, side);
        for (s, e) in envelope_runs(&b, params) {
            let span = e - s + 1;
            if span < min_span {
                continue;
            }
            let markedness = b.excess[s..=e].iter().sum::<f64>() / span as f64;
            if markedness <= 0.0 {
                continue;
            }
            let vertices = (s..=e).map(|c| (c, b.positions[c].unwrap())).collect();
            envelopes.push((side, vertices, markedness));
        }
    }

    let zeta = params.boltrope_proximity as f64;
    let to_figure = |kind, side, vertices: &[(usize, f64)], markedness| CharacteristicFigure {
        id: 0,
        kind,
        side,
        span: vertices[vertices.len() - 1].0 - vertices[0].0 + 1,
        ridge: vertices.iter().map(|&(c, p)| (from + c, field.ordinate_of(p))).collect(),
        markedness,
        short: short_share(field, vertices),
    };

    let mut figures = Vec::with_capacity(cords.len() + envelopes.len());
    for (vertices, markedness) in &cords {
        let mut side = Side::Interior;
        let mut kind = FigureKind::Cord;
        for (env_side, env, _) in &envelopes {
            let (e0, e1) = (env[0].0, env[env.len() - 1].0);
            let shared: Vec<f64> = vertices
                .iter()
                .filter(|(c, _)| (e0..=e1).contains(c))
                .map(|&(c, p)| (p - env[c - e0].1).abs())
                .collect();
            if !shared.is_empty() && shared.iter().sum::<f64>() / shared.len() as f64 <= zeta {
                kind = FigureKind::Boltrope;
                side = *env_side;
                break;
            }
        }
        figures.push(to_figure(kind, side, vertices, *markedness));
    }
    for (side, vertices, markedness) in &envelopes {
        figures.push(to_figure(FigureKind::Envelope, *side, vertices, *markedness));
    }

    figures.sort_by(|a, b| {
        b.markedness
            .total_cmp(&a.markedness)
            .then(a.kind.cmp(&b.kind))
            .then(a.first_column().cmp(&b.first_column()))
            .then(a.ridge[0].1.partial_cmp(&b.ridge[0].1).unwrap_or(Ordering::Equal))
    });
    for (i, f) in figures.iter_mut().enumerate() {
        f.id = i;
    }
    figures
}
