//! Midline extraction, slope-change segmentation and per-slice quadrilateral
//! rectification of wavy mosaics, plus uniform rescaling.
//!
//! Everything here works in canvas pixel coordinates with the stitch axis
//! horizontal.

use image::{GrayImage, Luma, Rgb, RgbImage};
use rayon::prelude::*;

use crate::batch::MosaicCanvas;
use crate::error::{Error, Result};
use crate::geometry::fit_homography_dlt;
use crate::imaging::{sample_rgb_masked, to_rgb};
use crate::model::{Point, Transform2D};

pub const DEFAULT_SMOOTH_WINDOW: usize = 51;
/// End columns shorter than this fraction of the median height are dropped.
pub const END_TRIM_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidlineSample {
    pub x: usize,
    pub y_top: f64,
    pub y_mid: f64,
    pub y_bottom: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Midline {
    /// One smoothed sample per column from the first to the last valid column.
    pub samples: Vec<MidlineSample>,
    /// Unsmoothed first/last valid rows, parallel to `samples`.
    pub raw: Vec<(f64, f64)>,
    pub breakpoints: Vec<usize>,
}

impl Midline {
    pub fn first_x(&self) -> usize {
        self.samples[0].x
    }

    pub fn last_x(&self) -> usize {
        self.samples[self.samples.len() - 1].x
    }

    pub fn at(&self, x: usize) -> &MidlineSample {
        &self.samples[x - self.first_x()]
    }
}

/// Centered moving average; the window shrinks symmetrically near the ends so
/// linear signals pass unchanged.
pub fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let n = v.len();
    let half = window.max(1) / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
    }
    (0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            (prefix[i + k + 1] - prefix[i - k]) / (2 * k + 1) as f64
        })
        .collect()
}

/// Per-column first/last valid rows, or `None` for empty columns.
fn column_extents(mask: &GrayImage) -> Vec<Option<(u32, u32)>> {
    let (w, h) = mask.dimensions();
    (0..w)
        .into_par_iter()
        .map(|x| {
            let top = (0..h).find(|&y| mask.get_pixel(x, y)[0] != 0)?;
            let bot = (0..h).rev().find(|&y| mask.get_pixel(x, y)[0] != 0)?;
            Some((top, bot))
        })
        .collect()
}

pub fn extract_midline(canvas: &MosaicCanvas, smooth_window: usize) -> Result<Midline> {
    let ext = column_extents(&canvas.mask);
    let first = ext.iter().position(Option::is_some).ok_or(Error::EmptyMask)?;
    let last = ext.iter().rposition(Option::is_some).unwrap();
    // Bridge interior empty columns linearly.
    let mut raw: Vec<(f64, f64)> = Vec::with_capacity(last - first + 1);
    let mut x = first;
    while x <= last {
        if let Some((t, b)) = ext[x] {
            raw.push((t as f64, b as f64));
            x += 1;
            continue;
        }
        let prev = ext[x - 1].unwrap();
        let next_x = (x..=last).find(|&k| ext[k].is_some()).unwrap();
        let next = ext[next_x].unwrap();
        let span = (next_x - (x - 1)) as f64;
        for k in x..next_x {
            let f = (k - (x - 1)) as f64 / span;
            raw.push((
                prev.0 as f64 + f * (next.0 as f64 - prev.0 as f64),
                prev.1 as f64 + f * (next.1 as f64 - prev.1 as f64),
            ));
        }
        x = next_x;
    }
    // Rotated frame corners leave thin wedges at the ends whose midline swings
    // steeply; they would take far more output width than they cover.
    let heights: Vec<f64> = raw.iter().map(|(t, b)| b - t + 1.0).collect();
    let mut sorted = heights.clone();
    sorted.sort_by(f64::total_cmp);
    let min_h = END_TRIM_FRACTION * sorted[sorted.len() / 2];
    let lo = heights.iter().position(|&h| h >= min_h).unwrap_or(0);
    let hi = heights.iter().rposition(|&h| h >= min_h).unwrap_or(raw.len() - 1);
    let first = first + lo;
    let raw: Vec<(f64, f64)> = raw[lo..=hi].to_vec();
    let last = first + raw.len() - 1;
    let tops: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let bots: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let mids: Vec<f64> = raw.iter().map(|r| 0.5 * (r.0 + r.1)).collect();
    let (ts, bs, ms) = (
        moving_average(&tops, smooth_window),
        moving_average(&bots, smooth_window),
        moving_average(&mids, smooth_window),
    );
    let samples = (0..raw.len())
        .map(|i| MidlineSample {
            x: first + i,
            y_top: ts[i],
            y_mid: ms[i],
            y_bottom: bs[i],
        })
        .collect();
    Ok(Midline {
        samples,
        raw,
        breakpoints: vec![first, last],
    })
}

fn perpendicular_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / len
}

/// Recursive endpoint-fit simplification of the midline polyline; returns the
/// surviving columns, first and last included.
pub fn segment_midline(m: &Midline, tolerance_px: f64) -> Vec<usize> {
    let pts: Vec<(f64, f64)> = m.samples.iter().map(|s| (s.x as f64, s.y_mid)).collect();
    let n = pts.len();
    if n < 2 {
        return m.samples.iter().map(|s| s.x).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let (mut best, mut dmax) = (i, -1.0);
        for k in i + 1..j {
            let d = perpendicular_distance(pts[k], pts[i], pts[j]);
            if d > dmax {
                dmax = d;
                best = k;
            }
        }
        if dmax > tolerance_px {
            keep[best] = true;
            stack.push((i, best));
            stack.push((best, j));
        }
    }
    (0..n).filter(|&k| keep[k]).map(|k| m.samples[k].x).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSlice {
    /// Top-left, top-right, bottom-right, bottom-left in canvas coordinates.
    pub corners: [Point; 4],
    pub u0: f64,
    pub u1: f64,
    /// Output rectangle → source quad.
    pub to_source: Transform2D,
    /// Source quad → output rectangle.
    pub to_output: Transform2D,
}

/// Piecewise-projective map from a wavy canvas to its straightened output.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectification {
    pub slices: Vec<QuadSlice>,
    pub width: u32,
    pub height: u32,
}

impl Rectification {
    fn slice_for_x(&self, x: f64) -> &QuadSlice {
        let i = self.slices.partition_point(|s| s.corners[1].x < x);
        &self.slices[i.min(self.slices.len() - 1)]
    }

    fn slice_for_u(&self, u: f64) -> &QuadSlice {
        let i = self.slices.partition_point(|s| s.u1 < u);
        &self.slices[i.min(self.slices.len() - 1)]
    }

    /// Canvas point to output point. End slices extrapolate.
    pub fn map_point(&self, p: &Point) -> Point {
        self.slice_for_x(p.x).to_output.apply(p)
    }

    /// Output point to canvas point.
    pub fn source_of(&self, q: &Point) -> Point {
        self.slice_for_u(q.x).to_source.apply(q)
    }
}

/// Vertical step shared by both mask edges. A frame border crossing the mask
/// moves only one edge and so adds no length.
fn shared_step(a: &MidlineSample, b: &MidlineSample) -> f64 {
    let (dt, db) = (b.y_top - a.y_top, b.y_bottom - a.y_bottom);
    if dt * db <= 0.0 {
        0.0
    } else {
        dt.signum() * dt.abs().min(db.abs())
    }
}

/// Integrated midline length between two columns.
fn arc_length(m: &Midline, x0: usize, x1: usize) -> f64 {
    (x0..x1)
        .map(|x| {
            let dy = shared_step(m.at(x), m.at(x + 1));
            (1.0 + dy * dy).sqrt()
        })
        .sum()
}

fn sample_with_fallback(canvas: &MosaicCanvas, m: &Midline, s: Point) -> [f32; 3] {
    if let Some(v) = sample_rgb_masked(&canvas.pixels, &canvas.mask, s.x, s.y) {
        return v;
    }
    // Clamp into the valid span of the nearest column.
    let x = (s.x.round().max(m.first_x() as f64) as usize).min(m.last_x());
    let (top, bot) = m.raw[x - m.first_x()];
    let y = s.y.clamp(top, bot);
    if let Some(v) = sample_rgb_masked(&canvas.pixels, &canvas.mask, x as f64, y) {
        return v;
    }
    let yi = y.round() as u32;
    let h = canvas.height();
    for d in 0..h {
        for yy in [yi.saturating_sub(d), (yi + d).min(h - 1)] {
            if canvas.mask.get_pixel(x as u32, yy)[0] != 0 {
                let p = canvas.pixels.get_pixel(x as u32, yy);
                return [p[0] as f32, p[1] as f32, p[2] as f32];
            }
        }
    }
    [0.0; 3]
}

/// Maps each breakpoint-delimited quad onto a rectangle of height `h`, with
/// widths proportional to midline arc length. The output mask is full.
pub fn slice_and_rectify(
    canvas: &MosaicCanvas,
    m: &Midline,
    breakpoints: &[usize],
    h: u32,
) -> Result<(MosaicCanvas, Rectification)> {
    if breakpoints.len() < 2 || h == 0 {
        return Err(Error::InvalidParameter("rectification needs >= 2 breakpoints and a positive height".into()));
    }
    let lengths: Vec<f64> = breakpoints.windows(2).map(|w| arc_length(m, w[0], w[1])).collect();
    let total: f64 = lengths.iter().sum();
    let width = total.round() as u32 + 1;
    let k = if total > 0.0 { (width - 1) as f64 / total } else { 0.0 };
    let bottom = (h - 1) as f64;

    let mut slices = Vec::with_capacity(lengths.len());
    let mut u = 0.0;
    for (i, w) in breakpoints.windows(2).enumerate() {
        let (xa, xb) = (w[0], w[1]);
        let (sa, sb) = (m.at(xa), m.at(xb));
        for (x, s) in [(xa, sa), (xb, sb)] {
            if s.y_bottom - s.y_top < 1.0 {
                return Err(Error::DegenerateSlice(x));
            }
        }
        let u1 = if i + 1 == lengths.len() { (width - 1) as f64 } else { u + k * lengths[i] };
        let corners = [
            Point::new(xa as f64, sa.y_top),
            Point::new(xb as f64, sb.y_top),
            Point::new(xb as f64, sb.y_bottom),
            Point::new(xa as f64, sa.y_bottom),
        ];
        let rect = [
            Point::new(u, 0.0),
            Point::new(u1, 0.0),
            Point::new(u1, bottom),
            Point::new(u, bottom),
        ];
        if h == 1 || u1 <= u {
            return Err(Error::DegenerateSlice(xa));
        }
        let to_source = fit_homography_dlt(&rect, &corners).map_err(|_| Error::DegenerateSlice(xa))?;
        let to_output = to_source.inverse().map_err(|_| Error::DegenerateSlice(xa))?;
        slices.push(QuadSlice { corners, u0: u, u1, to_source, to_output });
        u = u1;
    }
    let rect = Rectification { slices, width, height: h };

    let rows: Vec<Vec<Rgb<u8>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    let s = rect.source_of(&Point::new(x as f64, y as f64));
                    to_rgb(sample_with_fallback(canvas, m, s))
                })
                .collect()
        })
        .collect();
    let mut pixels = RgbImage::new(width, h);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, p) in row.into_iter().enumerate() {
            pixels.put_pixel(x as u32, y as u32, p);
        }
    }
    let out = MosaicCanvas {
        pixels,
        mask: GrayImage::from_pixel(width, h, Luma([255])),
        origin_offset: (0.0, 0.0),
        footprints: Vec::new(),
    };
    Ok((out, rect))
}

/// Median of the raw per-column mask heights.
pub fn median_column_height(m: &Midline) -> f64 {
    let mut hs: Vec<f64> = m.raw.iter().map(|(t, b)| b - t + 1.0).collect();
    hs.sort_by(f64::total_cmp);
    let n = hs.len();
    if n % 2 == 1 {
        hs[n / 2]
    } else {
        0.5 * (hs[n / 2 - 1] + hs[n / 2])
    }
}

/// Extract, segment and rectify. `height` defaults to the median column height.
pub fn straighten(
    canvas: &MosaicCanvas,
    tolerance_px: f64,
    smooth_window: usize,
    height: Option<u32>,
) -> Result<(MosaicCanvas, Rectification)> {
    let m = extract_midline(canvas, smooth_window)?;
    let bps = segment_midline(&m, tolerance_px);
    let h = height.unwrap_or_else(|| median_column_height(&m).round().max(2.0) as u32);
    slice_and_rectify(canvas, &m, &bps, h)
}

/// Uniform bilinear rescale so the height becomes `target_edge_px`. Returns the
/// canvas and the forward point map (pixel centers stay aligned).
pub fn rescale_to_height(canvas: &MosaicCanvas, target_edge_px: u32) -> Result<(MosaicCanvas, Transform2D)> {
    let (w, h) = (canvas.width(), canvas.height());
    if h == 0 || w == 0 {
        return Err(Error::EmptyMask);
    }
    if h == target_edge_px {
        return Ok((canvas.clone(), Transform2D::identity()));
    }
    let s = target_edge_px as f64 / h as f64;
    let nw = ((w as f64 * s).round() as u32).max(1);
    let nh = target_edge_px;
    let fwd = Transform2D::similarity(s, 0.0, 0.5 * s - 0.5, 0.5 * s - 0.5);
    let rows: Vec<Vec<(Rgb<u8>, u8)>> = (0..nh)
        .into_par_iter()
        .map(|y| {
            (0..nw)
                .map(|x| {
                    let sx = ((x as f64 + 0.5) / s - 0.5).clamp(0.0, (w - 1) as f64);
                    let sy = ((y as f64 + 0.5) / s - 0.5).clamp(0.0, (h - 1) as f64);
                    match sample_rgb_masked(&canvas.pixels, &canvas.mask, sx, sy) {
                        Some(v) => (to_rgb(v), 255),
                        None => (Rgb([0, 0, 0]), 0),
                    }
                })
                .collect()
        })
        .collect();
    let mut pixels = RgbImage::new(nw, nh);
    let mut mask = GrayImage::new(nw, nh);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (p, m)) in row.into_iter().enumerate() {
            pixels.put_pixel(x as u32, y as u32, p);
            mask.put_pixel(x as u32, y as u32, Luma([m]));
        }
    }
    Ok((
        MosaicCanvas {
            pixels,
            mask,
            origin_offset: (0.0, 0.0),
            footprints: Vec::new(),
        },
        fwd,
    ))
}
