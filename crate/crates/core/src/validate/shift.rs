use serde::{Deserialize, Serialize};

use crate::figures::CharacteristicFigure;
use crate::interact::{score_interactions, Extremum};

/// Interaction counts with extremum ordinates displaced vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTestResult {
    /// Shifts as fractions of the view price range; always contains 0.
    pub deltas: Vec<f64>,
    /// Interacting extrema per delta, aligned with `deltas`.
    pub counts: Vec<usize>,
    pub base_count: usize,
    /// Mean count over the nonzero deltas, `None` when there are none.
    pub mean_shifted: Option<f64>,
    pub tau: f64,
}

/// Re-scores `extrema` against fixed `figures` with every extremum ordinate
/// moved by `delta * price_range`. Moving the extrema up is the same, for
/// distance scoring, as moving the network down by the same amount. A zero
/// shift is inserted at the front when `deltas` lacks one.
pub fn shift_test(
    extrema: &[Extremum],
    figures: &[CharacteristicFigure],
    price_range: f64,
    tau: f64,
    deltas: &[f64],
) -> ShiftTestResult {
    let mut deltas = deltas.to_vec();
    if !deltas.contains(&0.0) {
        deltas.insert(0, 0.0);
    }
    let counts: Vec<usize> = deltas
        .iter()
        .map(|&delta| {
            let shifted: Vec<Extremum> = extrema
                .iter()
                .map(|e| Extremum {
                    ordinate: e.ordinate + delta * price_range,
                    ..*e
                })
                .collect();
            score_interactions(&shifted, figures, tau, price_range)
                .iter()
                .filter(|i| i.interacting)
                .count()
        })
        .collect();
    let base_count = deltas.iter().position(|&d| d == 0.0).map(|i| counts[i]).unwrap_or(0);
    let shifted: Vec<usize> = deltas
        .iter()
        .zip(&counts)
        .filter(|(d, _)| **d != 0.0)
        .map(|(_, &c)| c)
        .collect();
    let mean_shifted = (!shifted.is_empty()).then(|| shifted.iter().sum::<usize>() as f64 / shifted.len() as f64);
    ShiftTestResult {
        deltas,
        counts,
        base_count,
        mean_shifted,
        tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::figures::{FigureKind, Side};
    use crate::interact::ExtremumKind;

    fn flat(id: usize, y: f64) -> CharacteristicFigure {
        CharacteristicFigure {
            id,
            kind: FigureKind::Cord,
            side: Side::Interior,
            ridge: vec![(0, y), (50, y)],
            markedness: 1.0,
            span: 51,
            short: None,
        }
    }

    fn ext(index: usize, y: f64) -> Extremum {
        Extremum {
            index,
            kind: if index % 2 == 0 { ExtremumKind::Max } else { ExtremumKind::Min },
            ordinate: y,
            prominence: 1.0,
        }
    }

    #[test]
    fn zero_is_inserted_and_matches_plain_scoring() {
        let figs = vec![flat(0, 10.0), flat(1, 5.0)];
        let ex: Vec<_> = (0..10).map(|i| ext(i * 5, if i % 2 == 0 { 10.0 } else { 5.4 })).collect();
        let r = shift_test(&ex, &figs, 10.0, 0.02, &[0.05, -0.05]);
        assert_eq!(r.deltas, vec![0.0, 0.05, -0.05]);
        let plain = score_interactions(&ex, &figs, 0.02, 10.0).iter().filter(|i| i.interacting).count();
        assert_eq!(r.base_count, plain);
        assert_eq!(r.base_count, 5);
        // Both shifts move the maxima 0.05 away from their cord.
        assert_eq!(r.counts[1], 0);
        // -0.05 brings the minima to 4.9, 0.01 from the lower cord.
        assert_eq!(r.counts[2], 5);
        assert_eq!(r.mean_shifted, Some(2.5));
    }

    #[test]
    fn no_figures_no_counts() {
        let ex: Vec<_> = (0..6).map(|i| ext(i, i as f64)).collect();
        let r = shift_test(&ex, &[], 5.0, 0.1, &[0.0, 0.01, -0.01]);
        assert!(r.counts.iter().all(|&c| c == 0));
        assert_eq!(r.base_count, 0);
    }
}
