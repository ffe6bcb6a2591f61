use serde::{Deserialize, Serialize};

use super::ValidateError;
use crate::figures::CharacteristicFigure;

/// Monotone correspondence from columns of view A to columns of view B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnMap {
    Identity,
    /// `b = scale * a + offset`, `scale > 0`.
    Linear { scale: f64, offset: f64 },
}

impl ColumnMap {
    fn forward(&self, a: f64) -> f64 {
        match *self {
            Self::Identity => a,
            Self::Linear { scale, offset } => scale * a + offset,
        }
    }

    fn inverse(&self) -> Self {
        match *self {
            Self::Identity => Self::Identity,
            Self::Linear { scale, offset } => Self::Linear {
                scale: 1.0 / scale,
                offset: -offset / scale,
            },
        }
    }
}

/// Mean vertical distance from `from` to `to` over the columns of `from`
/// that `to` covers once mapped; `None` without any common column.
fn ridge_distance(from: &CharacteristicFigure, to: &CharacteristicFigure, map: ColumnMap) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(c, y) in &from.ridge {
        if let Some(other) = to.ordinate_at(map.forward(c as f64)) {
            sum += (y - other).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Rank weights `1 / (r + 1)`, `r` the position in descending markedness.
fn rank_weights(figures: &[CharacteristicFigure]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..figures.len()).collect();
    order.sort_by(|&a, &b| figures[b].markedness.total_cmp(&figures[a].markedness).then(a.cmp(&b)));
    let mut w = vec![0.0; figures.len()];
    for (rank, &i) in order.iter().enumerate() {
        w[i] = 1.0 / (rank + 1) as f64;
    }
    w
}

fn directed(a: &[CharacteristicFigure], b: &[CharacteristicFigure], map: ColumnMap, tau: f64) -> f64 {
    let weights = rank_weights(a);
    let mut matched = 0.0;
    for (f, w) in a.iter().zip(&weights) {
        let hit = b
            .iter()
            .filter_map(|g| ridge_distance(f, g, map))
            .any(|d| d <= tau);
        if hit {
            matched += w;
        }
    }
    matched / weights.iter().sum::<f64>()
}

/// Share of figures in each set that have a counterpart in the other, a
/// counterpart being any figure whose ridge lies within `tau` (price units)
/// on average over their common columns. Figures are weighted by markedness
/// rank and the two directions averaged, so the score is symmetric.
pub fn topology_overlap(
    a: &[CharacteristicFigure],
    b: &[CharacteristicFigure],
    map: ColumnMap,
    tau: f64,
) -> Result<f64, ValidateError> {
    if a.is_empty() {
        return Err(ValidateError::EmptyFigureSet("a"));
    }
    if b.is_empty() {
        return Err(ValidateError::EmptyFigureSet("b"));
    }
    if let ColumnMap::Linear { scale, .. } = map {
        if !(scale > 0.0) {
            return Err(ValidateError::InvalidConfig("column map scale must be positive".into()));
        }
    }
    Ok(0.5 * (directed(a, b, map, tau) + directed(b, a, map.inverse(), tau)))
}
