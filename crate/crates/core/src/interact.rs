//! Price extrema and their interactions with characteristic figures.
//!
//! Maxima are read on `H = M + d` and minima on `L = M - d`. Distances are
//! fractions of the view's price range, which makes every count here
//! invariant under affine price transforms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::figures::{CharacteristicFigure, Side};
use crate::ingest::Bar;

#[derive(Debug, Error, PartialEq)]
pub enum InteractError {
    #[error("need at least 3 bars to find extrema, got {0}")]
    SeriesTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Bar index.
    pub index: usize,
    pub kind: ExtremumKind,
    /// `H` for maxima, `L` for minima.
    pub ordinate: f64,
    /// Topographic prominence in price units.
    pub prominence: f64,
}

/// Price range `max H - min L` of a bar window.
pub fn price_range(bars: &[Bar]) -> f64 {
    let hi = bars.iter().map(Bar::high).fold(f64::NEG_INFINITY, f64::max);
    let lo = bars.iter().map(Bar::low).fold(f64::INFINITY, f64::min);
    if bars.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Candidate turning points of `values` (plateau centres), endpoints and
/// plateaus touching them excluded. `higher` orders "more extreme".
fn candidates(values: &[f64], higher: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !higher(values[i], values[i - 1]) {
            i += 1;
            continue;
        }
        let mut end = i;
        while end + 1 < n && values[end + 1] == values[i] {
            end += 1;
        }
        if end + 1 < n && higher(values[i], values[end + 1]) {
            out.push((i + end) / 2);
        }
        i = end + 1;
    }
    out
}

/// Local extrema filtered by prominence (fraction of the window's price
/// range) and separation (each extremum is the most extreme bar within
/// `min_separation` bars on either side), then collapsed to an alternating
/// max/min sequence.
pub fn detect_extrema(
    bars: &[Bar],
    prominence_fraction: f64,
    min_separation: usize,
) -> Result<Vec<Extremum>, InteractError> {
    let n = bars.len();
    if n < 3 {
        return Err(InteractError::SeriesTooShort(n));
    }
    let highs: Vec<f64> = bars.iter().map(Bar::high).collect();
    let lows: Vec<f64> = bars.iter().map(Bar::low).collect();
    let threshold = prominence_fraction * price_range(bars);
    let mut found = Vec::new();

    for i in candidates(&highs, |a, b| a > b) {
        let h = highs[i];
        let mut left_base = f64::INFINITY;
        for j in (0..i).rev() {
            if highs[j] > h {
                break;
            }
            left_base = left_base.min(lows[j]);
        }
        let mut right_base = f64::INFINITY;
        for j in i + 1..n {
            if highs[j] > h {
                break;
            }
            right_base = right_base.min(lows[j]);
        }
        let prominence = h - left_base.max(right_base);
        let lo = i.saturating_sub(min_separation);
        let hi = (i + min_separation).min(n - 1);
        let mut plateau = i;
        while plateau > 0 && highs[plateau - 1] == h {
            plateau -= 1;
        }
        let dominant = (lo..=hi).all(|j| highs[j] < h || (highs[j] == h && j >= plateau));
        if prominence >= threshold && prominence > 0.0 && dominant {
            found.push(Extremum {
                index: bars[i].index,
                kind: ExtremumKind::Max,
                ordinate: h,
                prominence,
            });
        }
    }
    for i in candidates(&lows, |a, b| a < b) {
        let l = lows[i];
        let mut left_base = f64::NEG_INFINITY;
        for j in (0..i).rev() {
            if lows[j] < l {
                break;
            }
            left_base = left_base.max(highs[j]);
        }
        let mut right_base = f64::NEG_INFINITY;
        for j in i + 1..n {
            if lows[j] < l {
                break;
            }
            right_base = right_base.max(highs[j]);
        }
        let prominence = left_base.min(right_base) - l;
        let lo = i.saturating_sub(min_separation);
        let hi = (i + min_separation).min(n - 1);
        let mut plateau = i;
        while plateau > 0 && lows[plateau - 1] == l {
            plateau -= 1;
        }
        let dominant = (lo..=hi).all(|j| lows[j] > l || (lows[j] == l && j >= plateau));
        if prominence >= threshold && prominence > 0.0 && dominant {
            found.push(Extremum {
                index: bars[i].index,
                kind: ExtremumKind::Min,
                ordinate: l,
                prominence,
            });
        }
    }
    found.sort_by_key(|e| (e.index, e.kind));
    // A bar can carry both a max and a min; order the pair so it alternates
    // with whatever precedes it.
    let mut i = 0;
    while i + 1 < found.len() {
        if found[i].index == found[i + 1].index {
            let swap = if i > 0 {
                found[i - 1].kind == found[i].kind
            } else if let Some(next) = found.get(i + 2) {
                next.kind == found[i + 1].kind
            } else {
                found[i + 1].prominence > found[i].prominence
            };
            if swap {
                found.swap(i, i + 1);
            }
            i += 2;
        } else {
            i += 1;
        }
    }

    let mut out: Vec<Extremum> = Vec::with_capacity(found.len());
    for e in found {
        match out.last_mut() {
            Some(last) if last.kind == e.kind => {
                let more_extreme = match e.kind {
                    ExtremumKind::Max => e.ordinate > last.ordinate,
                    ExtremumKind::Min => e.ordinate < last.ordinate,
                };
                if more_extreme {
                    *last = e;
                }
            }
            _ => out.push(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub extremum: Extremum,
    /// Figure whose ridge was matched, if any ridge spans the column.
    pub figure_id: Option<usize>,
    /// Vertical distance as a fraction of the view price range.
    pub distance: Option<f64>,
    pub interacting: bool,
}

/// Scores each extremum against the ridges covering its column. Maxima try
/// upper-side figures first and minima lower-side ones, falling back to the
/// nearest figure of any side.
pub fn score_interactions(
    extrema: &[Extremum],
    figures: &[CharacteristicFigure],
    tau: f64,
    price_range: f64,
) -> Vec<Interaction> {
    extrema
        .iter()
        .map(|e| {
            let preferred_side = match e.kind {
                ExtremumKind::Max => Side::Upper,
                ExtremumKind::Min => Side::Lower,
            };
            let mut nearest: Option<(f64, usize)> = None;
            let mut preferred: Option<(f64, usize)> = None;
            for f in figures {
                let Some(y) = f.ordinate_at(e.index as f64) else {
                    continue;
                };
                let d = if price_range > 0.0 {
                    (e.ordinate - y).abs() / price_range
                } else {
                    f64::INFINITY
                };
                let better = |cur: Option<(f64, usize)>| cur.is_none_or(|(bd, bid)| d < bd || (d == bd && f.id < bid));
                if better(nearest) {
                    nearest = Some((d, f.id));
                }
                if f.side == preferred_side && better(preferred) {
                    preferred = Some((d, f.id));
                }
            }
            let chosen = match preferred {
                Some((d, id)) if d <= tau => Some((d, id)),
                _ => nearest,
            };
            Interaction {
                extremum: *e,
                figure_id: chosen.map(|(_, id)| id),
                distance: chosen.map(|(d, _)| d),
                interacting: chosen.is_some_and(|(d, _)| d <= tau),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Qualifies,
    Fails,
    NotAssessable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualificationResult {
    pub extrema: usize,
    pub interacting: usize,
    pub fraction: f64,
    pub qualifies: bool,
    pub verdict: Verdict,
    pub threshold: f64,
    pub min_extrema: usize,
}

pub const DEFAULT_QUALIFICATION_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MIN_EXTREMA: usize = 8;

/// A chart qualifies when at least `min_extrema` extrema were found and at
/// least `threshold` of them interact.
pub fn qualify_chart(interactions: &[Interaction], threshold: f64, min_extrema: usize) -> QualificationResult {
    let extrema = interactions.len();
    let interacting = interactions.iter().filter(|i| i.interacting).count();
    let fraction = if extrema == 0 {
        0.0
    } else {
        interacting as f64 / extrema as f64
    };
    let verdict = if extrema < min_extrema {
        Verdict::NotAssessable
    } else if fraction >= threshold {
        Verdict::Qualifies
    } else {
        Verdict::Fails
    };
    QualificationResult {
        extrema,
        interacting,
        fraction,
        qualifies: verdict == Verdict::Qualifies,
        verdict,
        threshold,
        min_extrema,
    }
}
