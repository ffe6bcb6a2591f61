//! Window schedules and moving last-point polynomial regressions.
//!
//! Each curve of a network keeps, at every index `t`, only the value at the
//! last abscissa of the order-`D` least-squares polynomial fitted to the
//! trailing `n` values. The fitted value is linear in the data, so it is a
//! fixed dot product between a coefficient vector (depending on `n` and `D`
//! only) and the window's power moments `sum x^p y`.
//!
//! Moments are kept in the frame of an anchor window and shifted to the
//! current window with a binomial transform. The anchor is reset every
//! `min(n, 4096)` steps by direct summation, which bounds both the shift
//! magnitude and the accumulated rounding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ThinQr;

pub const MAX_ORDER: usize = 5;
pub const MIN_ORDER: usize = 1;
/// Hard upper bound on re-anchoring period.
pub const REANCHOR_PERIOD: usize = 4096;
/// Per-slice value count reported for the order-5 network of the reference
/// charts (`7500 + 7481 + ... + 9`).
pub const REFERENCE_TN5_VALUE_COUNT: u64 = 1_919_328;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("window {window} too small for order {order} (need at least {})", order + 2)]
    WindowTooSmall { window: usize, order: usize },
    #[error("degenerate least-squares system for window {window}, order {order}")]
    DegenerateSystem { window: usize, order: usize },
}

/// Window lengths `n_k` of an `N`-curve network of order `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSchedule {
    pub order: usize,
    pub count: usize,
    pub first: usize,
    pub last: usize,
    pub spacing: f64,
    pub windows: Vec<usize>,
}

/// Generates `n_k = round(n1 + (k-1)a + k(k-1)/(N(N-1)) (nN - n1 - (N-1)a))`
/// for `k = 1..=N`, rounding half away from zero.
pub fn compute_schedule(count: usize, first: usize, last: usize, spacing: f64) -> Result<Vec<usize>, RegressError> {
    if count < 2 {
        return Err(RegressError::InvalidSchedule(format!("need at least 2 curves, got {count}")));
    }
    if !spacing.is_finite() || spacing < 0.0 {
        return Err(RegressError::InvalidSchedule(format!("spacing {spacing} must be finite and non-negative")));
    }
    let n1 = first as f64;
    let nn = last as f64;
    let big_n = count as f64;
    if !(nn - n1 > spacing * (big_n - 1.0)) {
        return Err(RegressError::InvalidSchedule(format!(
            "{last} - {first} must exceed {spacing} * ({count} - 1)"
        )));
    }
    let excess = nn - n1 - (big_n - 1.0) * spacing;
    let denom = big_n * (big_n - 1.0);
    let windows = (1..=count)
        .map(|k| {
            let k = k as f64;
            (n1 + (k - 1.0) * spacing + k * (k - 1.0) / denom * excess).round() as usize
        })
        .collect();
    Ok(windows)
}

impl CurveSchedule {
    pub fn new(order: usize, count: usize, first: usize, last: usize, spacing: f64) -> Result<Self, RegressError> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(RegressError::InvalidSchedule(format!("order {order} outside 1..=5")));
        }
        if first < order + 2 {
            return Err(RegressError::WindowTooSmall { window: first, order });
        }
        let windows = compute_schedule(count, first, last, spacing)?;
        debug_assert!(windows.windows(2).all(|w| w[0] <= w[1]));
        Ok(Self {
            order,
            count,
            first,
            last,
            spacing,
            windows,
        })
    }

    /// Default schedule for subtype `TN<order>`: 600 curves, spacing 2,
    /// windows from `order + 4` to `1500 * order`.
    pub fn preset(order: usize) -> Result<Self, RegressError> {
        Self::new(order, 600, order + 4, 1500 * order, 2.0)
    }

    /// Largest window, i.e. `n_N`.
    pub fn max_window(&self) -> usize {
        *self.windows.last().expect("schedules have at least two curves")
    }

    pub fn min_window(&self) -> usize {
        self.windows[0]
    }

    pub fn label(&self) -> String {
        format!("TN{}", self.order)
    }
}

/// Values consumed by one slice of the network: `sum_k n_k`.
pub fn value_count(schedule: &CurveSchedule) -> u64 {
    schedule.windows.iter().map(|&n| n as u64).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCountComparison {
    pub count: usize,
    pub spacing: f64,
    pub first: usize,
    pub last: usize,
    pub value_count: u64,
    pub reference: u64,
    pub difference: i64,
    pub matches: bool,
}

/// Compares a candidate schedule's per-slice value count against a reference.
pub fn compare_value_count(schedule: &CurveSchedule, reference: u64) -> ValueCountComparison {
    let value_count = value_count(schedule);
    ValueCountComparison {
        count: schedule.count,
        spacing: schedule.spacing,
        first: schedule.first,
        last: schedule.last,
        value_count,
        reference,
        difference: value_count as i64 - reference as i64,
        matches: value_count == reference,
    }
}

/// Incremental last-point regression for one window length and order.
#[derive(Debug, Clone)]
pub struct RollingPolyFit {
    window: usize,
    order: usize,
    half: f64,
    period: usize,
    /// `(X^T X)^{-1} x_last` in the scaled local frame `x = (j - h) / h`.
    coeffs: Vec<f64>,
    binom: [[f64; MAX_ORDER + 1]; MAX_ORDER + 1],
}

/// Moments in the anchor frame, positioned at some window.
#[derive(Debug, Clone)]
pub struct RollingState {
    anchor: usize,
    /// Window end of the last emitted value.
    t: usize,
    moments: [f64; MAX_ORDER + 1],
}

impl RollingPolyFit {
    pub fn new(window: usize, order: usize) -> Result<Self, RegressError> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(RegressError::InvalidSchedule(format!("order {order} outside 1..=5")));
        }
        if window < order + 2 {
            return Err(RegressError::WindowTooSmall { window, order });
        }
        let cols = order + 1;
        let half = (window - 1) as f64 / 2.0;
        let mut vandermonde = Vec::with_capacity(window * cols);
        for j in 0..window {
            let x = (j as f64 - half) / half;
            let mut p = 1.0;
            for _ in 0..cols {
                vandermonde.push(p);
                p *= x;
            }
        }
        let qr = ThinQr::factor(vandermonde, window, cols, None)
            .ok_or(RegressError::DegenerateSystem { window, order })?;
        // x_last = 1, so the evaluation row is all ones.
        let ones = vec![1.0; cols];
        let coeffs = qr.solve_upper(&qr.solve_lower_transposed(&ones));
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(RegressError::DegenerateSystem { window, order });
        }
        let mut binom = [[0.0; MAX_ORDER + 1]; MAX_ORDER + 1];
        for p in 0..=MAX_ORDER {
            binom[p][0] = 1.0;
            for q in 1..=p {
                binom[p][q] = binom[p - 1][q - 1] + if q < p { binom[p - 1][q] } else { 0.0 };
            }
        }
        Ok(Self {
            window,
            order,
            half,
            period: window.min(REANCHOR_PERIOD),
            coeffs,
            binom,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn coord(&self, index: usize, anchor: usize) -> f64 {
        ((index - anchor) as f64 - self.half) / self.half
    }

    #[inline]
    fn accumulate(&self, moments: &mut [f64; MAX_ORDER + 1], u: f64, y: f64, sign: f64) {
        let mut p = sign * y;
        for m in moments.iter_mut().take(self.order + 1) {
            *m += p;
            p *= u;
        }
    }

    fn direct_moments(&self, values: &[f64], anchor: usize) -> [f64; MAX_ORDER + 1] {
        let mut moments = [0.0; MAX_ORDER + 1];
        for (i, &y) in values[anchor..anchor + self.window].iter().enumerate() {
            self.accumulate(&mut moments, self.coord(anchor + i, anchor), y, 1.0);
        }
        moments
    }

    fn evaluate(&self, state: &RollingState) -> f64 {
        let start = state.t + 1 - self.window;
        let delta = (start - state.anchor) as f64 / self.half;
        let d = self.order;
        let mut neg = [1.0; MAX_ORDER + 1];
        for i in 1..=d {
            neg[i] = neg[i - 1] * -delta;
        }
        let mut acc = 0.0;
        for q in 0..=d {
            let mut w = 0.0;
            for p in q..=d {
                w += self.coeffs[p] * self.binom[p][q] * neg[p - q];
            }
            acc += w * state.moments[q];
        }
        acc
    }

    /// State after emitting the value at window end `t`, reconstructed from
    /// scratch. Stepping a state forward and resuming at the same `t` yield
    /// bit-identical moments.
    pub fn resume(&self, values: &[f64], t: usize) -> RollingState {
        assert!(t + 1 >= self.window && t < values.len());
        let start = t + 1 - self.window;
        let anchor = start - start % self.period;
        let mut state = RollingState {
            anchor,
            t: anchor + self.window - 1,
            moments: self.direct_moments(values, anchor),
        };
        while state.t < t {
            self.step(values, &mut state);
        }
        state
    }

    /// Advances the state by one index; `values` must extend past `state.t`.
    fn step(&self, values: &[f64], state: &mut RollingState) {
        let t = state.t + 1;
        let start = t + 1 - self.window;
        if start - state.anchor >= self.period {
            state.anchor = start;
            state.moments = self.direct_moments(values, start);
        } else {
            let anchor = state.anchor;
            self.accumulate(&mut state.moments, self.coord(t, anchor), values[t], 1.0);
            self.accumulate(&mut state.moments, self.coord(start - 1, anchor), values[start - 1], -1.0);
        }
        state.t = t;
    }

    /// Value at window end `t + 1`, advancing the state.
    pub fn next_value(&self, values: &[f64], state: &mut RollingState) -> f64 {
        self.step(values, state);
        self.evaluate(state)
    }

    /// Last-point values for every window end `t >= n - 1`; element `i` of
    /// the result belongs to index `n - 1 + i`.
    pub fn run(&self, values: &[f64]) -> Vec<f64> {
        if values.len() < self.window {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(values.len() + 1 - self.window);
        let mut state = self.resume(values, self.window - 1);
        out.push(self.evaluate(&state));
        while state.t + 1 < values.len() {
            out.push(self.next_value(values, &mut state));
        }
        out
    }

    /// Value at `state.t` without advancing.
    pub fn current(&self, state: &RollingState) -> f64 {
        self.evaluate(state)
    }
}

impl RollingState {
    /// Window end of the last emitted value.
    pub fn position(&self) -> usize {
        self.t
    }
}

/// Moving order-`order` regression over windows of `window` values, keeping
/// only the fitted value at the last abscissa.
pub fn rolling_regression_last(values: &[f64], window: usize, order: usize) -> Result<Vec<f64>, RegressError> {
    let fit = RollingPolyFit::new(window, order)?;
    if values.len() < window {
        return Err(RegressError::InvalidSchedule(format!(
            "series of {} values shorter than window {window}",
            values.len()
        )));
    }
    Ok(fit.run(values))
}

/// Direct least-squares fit of one window, evaluated at its last abscissa.
pub fn fit_last_point(window: &[f64], order: usize) -> Result<f64, RegressError> {
    let n = window.len();
    if n < order + 2 {
        return Err(RegressError::WindowTooSmall { window: n, order });
    }
    let half = (n - 1) as f64 / 2.0;
    let xs: Vec<f64> = (0..n).map(|j| (j as f64 - half) / half).collect();
    let coeffs = crate::linalg::polyfit(&xs, window, order).ok_or(RegressError::DegenerateSystem { window: n, order })?;
    Ok(coeffs.iter().sum())
}
