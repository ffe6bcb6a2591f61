//! Deterministic chart rendering.
//!
//! Curves are drawn from the longest window to the shortest, so short
//! curves sit on top, then the bars as vertical `[L, H]` segments, then the
//! optional figure overlay. All blending is integer arithmetic on an RGB
//! buffer, which makes the PNG bytes a pure function of the inputs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::figures::{CharacteristicFigure, ViewWindow};
use crate::ingest::Bar;
use crate::network::Network;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("empty view window")]
    EmptyView,
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub width: u32,
    pub height: u32,
    pub background: Rgb,
    pub short_color: Rgb,
    pub long_color: Rgb,
    /// Curves with rank below this are short. `None` means `N / 3`.
    pub short_rank_threshold: Option<usize>,
    /// Opacity of one curve stroke, 0..=255.
    pub curve_alpha: u8,
    pub bar_color: Rgb,
    pub figure_color: Rgb,
    pub show_figures: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            width: 1200,
            height: 700,
            background: [255, 255, 255],
            short_color: [20, 150, 60],
            long_color: [30, 70, 200],
            short_rank_threshold: None,
            curve_alpha: 48,
            bar_color: [0, 0, 0],
            figure_color: [220, 30, 30],
            show_figures: true,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width < 64 || self.height < 64 {
            return Err(RenderError::InvalidStyle(format!(
                "{}x{} is below 64x64",
                self.width, self.height
            )));
        }
        Ok(())
    }

    fn is_short(&self, rank: usize, count: usize) -> bool {
        match self.short_rank_threshold {
            Some(k) => rank < k,
            None => 3 * rank < count,
        }
    }
}

/// Maps bar index and price to pixel centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewTransform {
    pub window: ViewWindow,
    pub lo: f64,
    pub hi: f64,
    pub width: u32,
    pub height: u32,
}

impl ViewTransform {
    /// Bounds cover the curves and bars inside `window`, padded by 3%.
    pub fn fit(network: &Network, bars: &[Bar], window: ViewWindow, width: u32, height: u32) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in network.curves() {
            for t in window.from.max(c.start())..window.to {
                let v = c.values[t - c.start()];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        for b in bars.iter().filter(|b| window.contains(b.index)) {
            lo = lo.min(b.low());
            hi = hi.max(b.high());
        }
        if !(hi > lo) {
            let mid = if lo.is_finite() { lo } else { 0.0 };
            lo = mid - 0.5;
            hi = mid + 0.5;
        }
        let pad = 0.03 * (hi - lo);
        Self {
            window,
            lo: lo - pad,
            hi: hi + pad,
            width,
            height,
        }
    }

    pub fn x(&self, t: f64) -> f64 {
        (t - self.window.from as f64 + 0.5) * self.width as f64 / self.window.columns() as f64 - 0.5
    }

    pub fn y(&self, v: f64) -> f64 {
        (self.hi - v) / (self.hi - self.lo) * (self.height - 1) as f64
    }
}

/// An RGB pixel buffer, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let pixels = fill.repeat((width * height) as usize);
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = 3 * (y * self.width + x) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn blend(&mut self, x: i64, y: i64, color: Rgb, alpha: u8) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        let a = alpha as u32;
        for k in 0..3 {
            let dst = self.pixels[i + k] as u32;
            self.pixels[i + k] = ((color[k] as u32 * a + dst * (255 - a) + 127) / 255) as u8;
        }
    }

    /// Integer line between rounded endpoints; the end pixel is skipped so
    /// that chained segments blend each pixel once.
    fn segment(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb, alpha: u8, last: bool) {
        let (mut x, mut y) = (x0.round() as i64, y0.round() as i64);
        let (xe, ye) = (x1.round() as i64, y1.round() as i64);
        let dx = (xe - x).abs();
        let dy = -(ye - y).abs();
        let sx = if x < xe { 1 } else { -1 };
        let sy = if y < ye { 1 } else { -1 };
        let mut err = dx + dy;
        while x != xe || y != ye {
            self.blend(x, y, color, alpha);
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
        if last {
            self.blend(x, y, color, alpha);
        }
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: Rgb, alpha: u8) {
        if let [only] = points {
            self.blend(only.0.round() as i64, only.1.round() as i64, color, alpha);
        }
        for (i, w) in points.windows(2).enumerate() {
            self.segment(w[0], w[1], color, alpha, i + 2 == points.len());
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }
}

fn curve_points(network: &Network, rank_index: usize, tf: &ViewTransform) -> Vec<(f64, f64)> {
    let c = &network.curves()[rank_index];
    (tf.window.from.max(c.start())..tf.window.to)
        .map(|t| (tf.x(t as f64), tf.y(c.values[t - c.start()])))
        .collect()
}

fn figure_points(f: &CharacteristicFigure, tf: &ViewTransform) -> Vec<(f64, f64)> {
    f.ridge
        .iter()
        .filter(|(t, _)| tf.window.contains(*t))
        .map(|&(t, y)| (tf.x(t as f64), tf.y(y)))
        .collect()
}

fn check_view(network: &Network, window: ViewWindow) -> Result<ViewWindow, RenderError> {
    let window = ViewWindow::new(window.from, window.to.min(network.len()));
    if window.columns() == 0 {
        return Err(RenderError::EmptyView);
    }
    Ok(window)
}

/// Draws the chart into a pixel buffer.
pub fn rasterize(
    network: &Network,
    bars: &[Bar],
    window: ViewWindow,
    figures: Option<&[CharacteristicFigure]>,
    style: &RenderStyle,
) -> Result<Raster, RenderError> {
    style.validate()?;
    let window = check_view(network, window)?;
    let tf = ViewTransform::fit(network, bars, window, style.width, style.height);
    let mut raster = Raster::new(style.width, style.height, style.background);
    let count = network.curves().len();
    for i in (0..count).rev() {
        let rank = network.curves()[i].rank;
        let color = if style.is_short(rank, count) {
            style.short_color
        } else {
            style.long_color
        };
        raster.polyline(&curve_points(network, i, &tf), color, style.curve_alpha);
    }
    for b in bars.iter().filter(|b| window.contains(b.index)) {
        let x = tf.x(b.index as f64);
        raster.segment((x, tf.y(b.high())), (x, tf.y(b.low())), style.bar_color, 255, true);
    }
    if style.show_figures {
        for f in figures.unwrap_or(&[]) {
            let pts = figure_points(f, &tf);
            raster.polyline(&pts, style.figure_color, 255);
            let below: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, y + 1.0)).collect();
            raster.polyline(&below, style.figure_color, 255);
        }
    }
    Ok(raster)
}

/// PNG bytes of the chart.
pub fn render_chart(
    network: &Network,
    bars: &[Bar],
    window: ViewWindow,
    figures: Option<&[CharacteristicFigure]>,
    style: &RenderStyle,
) -> Result<Vec<u8>, RenderError> {
    rasterize(network, bars, window, figures, style)?.to_png()
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn svg_points(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

/// The same chart as an SVG document.
pub fn render_svg(
    network: &Network,
    bars: &[Bar],
    window: ViewWindow,
    figures: Option<&[CharacteristicFigure]>,
    style: &RenderStyle,
) -> Result<String, RenderError> {
    style.validate()?;
    let window = check_view(network, window)?;
    let tf = ViewTransform::fit(network, bars, window, style.width, style.height);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"{bg}\"/>\n",
        w = style.width,
        h = style.height,
        bg = hex(style.background)
    );
    let opacity = style.curve_alpha as f64 / 255.0;
    let count = network.curves().len();
    for i in (0..count).rev() {
        let rank = network.curves()[i].rank;
        let color = if style.is_short(rank, count) {
            style.short_color
        } else {
            style.long_color
        };
        let pts = curve_points(network, i, &tf);
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-opacity=\"{opacity:.3}\" data-rank=\"{rank}\" points=\"{}\"/>",
            hex(color),
            svg_points(&pts)
        );
    }
    for b in bars.iter().filter(|b| window.contains(b.index)) {
        let x = tf.x(b.index as f64);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>",
            tf.y(b.high()),
            tf.y(b.low()),
            hex(style.bar_color)
        );
    }
    if style.show_figures {
        for f in figures.unwrap_or(&[]) {
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" data-kind=\"{:?}\" points=\"{}\"/>",
                hex(style.figure_color),
                f.kind,
                svg_points(&figure_points(f, &tf))
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
