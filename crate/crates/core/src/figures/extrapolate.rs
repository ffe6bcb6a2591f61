use super::{CharacteristicFigure, FigureError};
use crate::linalg::{polyfit, polyval};

/// Projects a figure forward by fitting an `order` 1 or 2 polynomial to the
/// trailing third of its ridge. Returns one `(column, ordinate)` pair per
/// column in `(last, last + horizon]`.
pub fn extrapolate_figure(
    figure: &CharacteristicFigure,
    horizon: usize,
    order: usize,
) -> Result<Vec<(usize, f64)>, FigureError> {
    if !(1..=2).contains(&order) {
        return Err(FigureError::InvalidParams(format!("extrapolation order {order} not in 1..=2")));
    }
    if figure.span < 3 || figure.ridge.len() < order + 1 {
        return Err(FigureError::SpanTooShort {
            span: figure.span,
            needed: 3,
        });
    }
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let n = figure.ridge.len();
    let take = n.div_ceil(3).max(order + 1).min(n);
    let tail = &figure.ridge[n - take..];
    let last = figure.last_column();
    let xs: Vec<f64> = tail.iter().map(|&(c, _)| c as f64 - last as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&(_, y)| y).collect();
    let coeffs = polyfit(&xs, &ys, order).ok_or(FigureError::SpanTooShort {
        span: figure.span,
        needed: 3,
    })?;
    Ok((1..=horizon).map(|h| (last + h, polyval(&coeffs, h as f64))).collect())
}
