//! Curve bundles ("topological networks") built from a bar series.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::BarSeries;
use crate::regress::{CurveSchedule, RegressError, RollingPolyFit, RollingState};

pub const NETWORK_MAGIC: &[u8; 16] = b"TOPONET\0NETWORK\0";
pub const NETWORK_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("series of {available} bars too short: need at least {needed}")]
    SeriesTooShort { needed: usize, available: usize },
    #[error("index {index} out of range for series of {len} bars")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("network file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One curve of the bundle. `values[i]` belongs to bar `window - 1 + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveColumn {
    /// 1-based rank `k`.
    pub rank: usize,
    pub window: usize,
    pub values: Vec<f64>,
}

impl CurveColumn {
    /// First bar index with a defined value.
    pub fn start(&self) -> usize {
        self.window - 1
    }

    pub fn value_at(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.start()).and_then(|i| self.values.get(i)).copied()
    }
}

/// Ordinates of every curve defined at bar `t`; `ordinates[i]` is rank `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSlice {
    pub t: usize,
    pub ordinates: Vec<f64>,
}

impl NetworkSlice {
    /// Input values consumed to produce this slice.
    pub fn consumed_values(&self, schedule: &CurveSchedule) -> u64 {
        schedule.windows[..self.ordinates.len()].iter().map(|&n| n as u64).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    schedule: CurveSchedule,
    source: Vec<f64>,
    curves: Vec<CurveColumn>,
    fits: Vec<RollingPolyFit>,
    states: Vec<Option<RollingState>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.schedule == other.schedule && self.source == other.source && self.curves == other.curves
    }
}

/// Builds the network from the `M` values of `series`. `H`, `L` and `d`
/// never enter the regressions.
pub fn build_network(series: &BarSeries, schedule: &CurveSchedule) -> Result<Network, NetworkError> {
    Network::from_mids(series.mids(), schedule.clone())
}

impl Network {
    pub fn from_mids(source: Vec<f64>, schedule: CurveSchedule) -> Result<Self, NetworkError> {
        let needed = schedule.min_window() + 1;
        if source.len() < needed {
            return Err(NetworkError::SeriesTooShort {
                needed,
                available: source.len(),
            });
        }
        let fits = schedule
            .windows
            .iter()
            .map(|&n| RollingPolyFit::new(n, schedule.order))
            .collect::<Result<Vec<_>, _>>()?;
        let curves = fits
            .par_iter()
            .enumerate()
            .map(|(i, fit)| CurveColumn {
                rank: i + 1,
                window: fit.window(),
                values: fit.run(&source),
            })
            .collect();
        let states = vec![None; fits.len()];
        Ok(Self {
            schedule,
            source,
            curves,
            fits,
            states,
        })
    }

    pub fn schedule(&self) -> &CurveSchedule {
        &self.schedule
    }

    pub fn curves(&self) -> &[CurveColumn] {
        &self.curves
    }

    /// The `M` values the network was built from.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn label(&self) -> String {
        self.schedule.label()
    }

    /// First bar index at which every curve is defined.
    pub fn complete_from(&self) -> usize {
        self.schedule.max_window() - 1
    }

    /// True when the longest curves have not started anywhere in the series.
    pub fn is_partial(&self) -> bool {
        self.len() < self.schedule.max_window()
    }

    /// True when bar `t` lies in the onset region where only some curves exist.
    pub fn is_partial_at(&self, t: usize) -> bool {
        t < self.complete_from()
    }

    /// Number of curves defined at bar `t`.
    pub fn defined_at(&self, t: usize) -> usize {
        self.schedule.windows.partition_point(|&n| n <= t + 1)
    }

    pub fn slice(&self, t: usize) -> Result<NetworkSlice, NetworkError> {
        if t >= self.len() {
            return Err(NetworkError::IndexOutOfRange { index: t, len: self.len() });
        }
        let ordinates = self.curves[..self.defined_at(t)]
            .iter()
            .map(|c| c.values[t - c.start()])
            .collect();
        Ok(NetworkSlice { t, ordinates })
    }

    /// Extends every curve by one bar. Existing values are untouched.
    pub fn append(&mut self, m: f64) {
        self.source.push(m);
        let t = self.source.len() - 1;
        let source = &self.source;
        self.curves
            .par_iter_mut()
            .zip(self.states.par_iter_mut())
            .zip(self.fits.par_iter())
            .for_each(|((curve, state), fit)| {
                let n = fit.window();
                if t + 1 < n {
                    return;
                }
                let value = if t + 1 == n {
                    let s = fit.resume(source, t);
                    let v = fit.current(&s);
                    *state = Some(s);
                    v
                } else {
                    let mut s = match state.take() {
                        Some(s) if s.position() + 1 == t => s,
                        _ => fit.resume(source, t - 1),
                    };
                    let v = fit.next_value(source, &mut s);
                    *state = Some(s);
                    v
                };
                curve.values.push(value);
            });
    }

    /// Compact binary export: magic, version, schedule header, source `M`
    /// values, then each curve's ordinates contiguously.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), NetworkError> {
        let mut buf = Vec::with_capacity(64 + 8 * self.source.len() * (1 + self.curves.len()));
        buf.extend_from_slice(NETWORK_MAGIC);
        buf.push(NETWORK_VERSION);
        buf.push(self.schedule.order as u8);
        buf.extend_from_slice(&(self.schedule.count as u32).to_le_bytes());
        buf.extend_from_slice(&(self.schedule.first as u32).to_le_bytes());
        buf.extend_from_slice(&(self.schedule.last as u32).to_le_bytes());
        buf.extend_from_slice(&self.schedule.spacing.to_bits().to_le_bytes());
        for &n in &self.schedule.windows {
            buf.extend_from_slice(&(n as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(self.source.len() as u64).to_le_bytes());
        for &m in &self.source {
            buf.extend_from_slice(&m.to_bits().to_le_bytes());
        }
        for curve in &self.curves {
            for &v in &curve.values {
                buf.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, NetworkError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cursor = ByteCursor { bytes: &bytes, pos: 0 };
        if cursor.take(16)? != NETWORK_MAGIC {
            return Err(NetworkError::Format("bad magic".into()));
        }
        let version = cursor.take(1)?[0];
        if version != NETWORK_VERSION {
            return Err(NetworkError::Format(format!("unsupported version {version}")));
        }
        let order = cursor.take(1)?[0] as usize;
        let count = cursor.u32()? as usize;
        let first = cursor.u32()? as usize;
        let last = cursor.u32()? as usize;
        let spacing = f64::from_bits(cursor.u64()?);
        let windows = (0..count).map(|_| cursor.u32().map(|n| n as usize)).collect::<Result<Vec<_>, _>>()?;
        let schedule = CurveSchedule {
            order,
            count,
            first,
            last,
            spacing,
            windows,
        };
        let len = cursor.u64()? as usize;
        let source = (0..len).map(|_| cursor.f64()).collect::<Result<Vec<_>, _>>()?;
        let fits = schedule
            .windows
            .iter()
            .map(|&n| RollingPolyFit::new(n, order))
            .collect::<Result<Vec<_>, _>>()?;
        let mut curves = Vec::with_capacity(count);
        for (i, &n) in schedule.windows.iter().enumerate() {
            let values = (0..(len + 1).saturating_sub(n))
                .map(|_| cursor.f64())
                .collect::<Result<Vec<_>, _>>()?;
            curves.push(CurveColumn {
                rank: i + 1,
                window: n,
                values,
            });
        }
        if cursor.pos != bytes.len() {
            return Err(NetworkError::Format("trailing bytes".into()));
        }
        Ok(Self {
            states: vec![None; count],
            schedule,
            source,
            curves,
            fits,
        })
    }

    /// JSON-friendly view of bars `[from, to)`, each curve decimated to at
    /// most `max_points` vertices (`0` keeps every point).
    pub fn view(&self, from: usize, to: usize, max_points: usize) -> NetworkView {
        let to = to.min(self.len());
        let from = from.min(to);
        let curves = self
            .curves
            .iter()
            .filter_map(|c| {
                let start = from.max(c.start());
                if start >= to {
                    return None;
                }
                let span = to - start;
                let stride = if max_points == 0 { 1 } else { span.div_ceil(max_points).max(1) };
                let mut points: Vec<[f64; 2]> = (start..to)
                    .step_by(stride)
                    .map(|t| [t as f64, c.values[t - c.start()]])
                    .collect();
                if !(to - 1 - start).is_multiple_of(stride) {
                    points.push([(to - 1) as f64, c.values[to - 1 - c.start()]]);
                }
                Some(CurvePolyline {
                    rank: c.rank,
                    window: c.window,
                    points,
                })
            })
            .collect();
        NetworkView {
            subtype: self.label(),
            schedule: self.schedule.clone(),
            from,
            to,
            complete_from: self.complete_from(),
            curves,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePolyline {
    pub rank: usize,
    pub window: usize,
    /// `[bar index, ordinate]` pairs.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkView {
    pub subtype: String,
    pub schedule: CurveSchedule,
    pub from: usize,
    pub to: usize,
    pub complete_from: usize,
    pub curves: Vec<CurvePolyline>,
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(NetworkError::Format("truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_bits(self.u64()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::fit_last_point;

    fn small_schedule() -> CurveSchedule {
        CurveSchedule {
            order: 1,
            count: 3,
            first: 3,
            last: 7,
            spacing: 2.0,
            windows: vec![3, 5, 7],
        }
    }

    fn wavy(n: usize) -> Vec<f64> {
        (0..n).map(|t| 50.0 + (t as f64 * 0.21).sin() * 4.0 + (t as f64 * 0.057).cos() * 9.0).collect()
    }

    #[test]
    fn curve_offsets_follow_windows() {
        let net = Network::from_mids(wavy(10), small_schedule()).unwrap();
        let lens: Vec<usize> = net.curves().iter().map(|c| c.values.len()).collect();
        let starts: Vec<usize> = net.curves().iter().map(|c| c.start()).collect();
        assert_eq!(lens, vec![8, 6, 4]);
        assert_eq!(starts, vec![2, 4, 6]);
        assert!(net.is_partial_at(5));
        assert!(!net.is_partial_at(6));
    }

    #[test]
    fn too_short_series_rejected() {
        assert!(matches!(
            Network::from_mids(wavy(3), small_schedule()),
            Err(NetworkError::SeriesTooShort { needed: 4, available: 3 })
        ));
        let partial = Network::from_mids(wavy(5), small_schedule()).unwrap();
        assert!(partial.is_partial());
    }

    #[test]
    fn slices() {
        let schedule = CurveSchedule::new(2, 40, 5, 120, 1.0).unwrap();
        let values = wavy(300);
        let net = Network::from_mids(values.clone(), schedule.clone()).unwrap();
        assert_eq!(net.slice(119).unwrap().ordinates.len(), 40);
        assert_eq!(net.slice(119).unwrap().consumed_values(&schedule), crate::regress::value_count(&schedule));
        assert!(net.slice(0).unwrap().ordinates.is_empty());
        assert!(matches!(net.slice(300), Err(NetworkError::IndexOutOfRange { .. })));
        let s = net.slice(77).unwrap();
        for (i, &y) in s.ordinates.iter().enumerate() {
            let n = schedule.windows[i];
            let direct = fit_last_point(&values[78 - n..78], 2).unwrap();
            assert!((y - direct).abs() < 1e-9 * 60.0);
        }
    }

    #[test]
    fn append_prolongs_without_touching_history() {
        let schedule = CurveSchedule::new(3, 20, 5, 60, 1.0).unwrap();
        let values = wavy(200);
        let mut net = Network::from_mids(values[..150].to_vec(), schedule.clone()).unwrap();
        let before = net.clone();
        net.append(values[150]);
        for (a, b) in before.curves().iter().zip(net.curves()) {
            assert_eq!(&b.values[..a.values.len()], &a.values[..]);
            assert_eq!(b.values.len(), a.values.len() + 1);
        }
        for &m in &values[151..] {
            net.append(m);
        }
        let full = Network::from_mids(values, schedule).unwrap();
        assert_eq!(net, full);
    }

    #[test]
    fn append_across_curve_onsets() {
        let schedule = small_schedule();
        let values = wavy(30);
        let mut net = Network::from_mids(values[..4].to_vec(), schedule.clone()).unwrap();
        for &m in &values[4..] {
            net.append(m);
        }
        assert_eq!(net, Network::from_mids(values, schedule).unwrap());
    }

    #[test]
    fn mid_only_input() {
        let pairs: Vec<(f64, f64)> = wavy(80).into_iter().map(|m| (m, m * 0.01)).collect();
        let with_band = BarSeries::from_mid_half_range(&pairs);
        let points = BarSeries::from_values(&with_band.mids());
        let schedule = CurveSchedule::new(2, 10, 4, 40, 1.0).unwrap();
        assert_eq!(
            build_network(&with_band, &schedule).unwrap(),
            build_network(&points, &schedule).unwrap()
        );
    }

    #[test]
    fn binary_round_trip() {
        let schedule = CurveSchedule::new(2, 25, 4, 90, 1.5).unwrap();
        let net = Network::from_mids(wavy(140), schedule).unwrap();
        let mut bytes = Vec::new();
        net.write_binary(&mut bytes).unwrap();
        let back = Network::read_binary(bytes.as_slice()).unwrap();
        assert_eq!(back, net);
        let mut again = Vec::new();
        back.write_binary(&mut again).unwrap();
        assert_eq!(again, bytes);
        assert!(Network::read_binary(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn view_decimates_and_keeps_endpoints() {
        let schedule = CurveSchedule::new(1, 5, 3, 20, 1.0).unwrap();
        let net = Network::from_mids(wavy(100), schedule).unwrap();
        let view = net.view(10, 100, 16);
        assert_eq!(view.curves.len(), 5);
        for c in &view.curves {
            assert!(c.points.len() <= 17);
            assert_eq!(c.points.last().unwrap()[0], 99.0);
        }
        let json = serde_json::to_string(&view).unwrap();
        assert!(json.contains("\"subtype\":\"TN1\""));
    }

    #[test]
    fn affine_equivariance() {
        let schedule = CurveSchedule::new(4, 30, 6, 150, 1.0).unwrap();
        let values = wavy(260);
        let base = Network::from_mids(values.clone(), schedule.clone()).unwrap();
        for (alpha, beta) in [(-2.0, 1.0), (0.5, -3.0), (10.0, 7.0)] {
            let mapped = Network::from_mids(values.iter().map(|v| alpha * v + beta).collect(), schedule.clone()).unwrap();
            for (a, b) in base.curves().iter().zip(mapped.curves()) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    let want = alpha * x + beta;
                    assert!((y - want).abs() <= 1e-10 * want.abs().max(1.0));
                }
            }
        }
    }
}
