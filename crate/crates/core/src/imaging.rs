//! Small raster helpers shared by the detection, warping and compositing stages.

use image::{GrayImage, Rgb, RgbImage};
use rayon::prelude::*;

use crate::model::{Point, Transform2D};

/// Single-channel floating point raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Gray {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Luma `0.299 R + 0.587 G + 0.114 B`.
    pub fn luma(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect();
        Self {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    /// 3×3 box mean with edge replication.
    pub fn box3(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut tmp = Gray::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let l = self.get(x.saturating_sub(1), y);
                let r = self.get((x + 1).min(w - 1), y);
                tmp.set(x, y, l + self.get(x, y) + r);
            }
        }
        let mut out = Gray::new(w, h);
        for y in 0..h {
            let up = y.saturating_sub(1);
            let dn = (y + 1).min(h - 1);
            for x in 0..w {
                out.set(x, y, (tmp.get(x, up) + tmp.get(x, y) + tmp.get(x, dn)) / 9.0);
            }
        }
        out
    }

    /// Bilinear sample with edge clamping.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Summed-area table with one row/column of zero padding.
#[derive(Debug, Clone)]
pub struct Integral {
    width: usize,
    data: Vec<f64>,
}

impl Integral {
    pub fn new(g: &Gray) -> Self {
        let w = g.width + 1;
        let mut data = vec![0.0f64; w * (g.height + 1)];
        for y in 0..g.height {
            let mut row = 0.0f64;
            for x in 0..g.width {
                row += g.get(x, y) as f64;
                data[(y + 1) * w + x + 1] = data[y * w + x + 1] + row;
            }
        }
        Self { width: w, data }
    }

    /// Sum over the inclusive pixel rectangle `[x0, x1] × [y0, y1]`.
    pub fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let w = self.width;
        self.data[(y1 + 1) * w + x1 + 1] - self.data[y0 * w + x1 + 1] - self.data[(y1 + 1) * w + x0]
            + self.data[y0 * w + x0]
    }
}

/// Bilinear RGB sample at `(x, y)`; `None` when the point falls outside the
/// pixel-center grid `[0, w-1] × [0, h-1]`.
pub fn sample_rgb(img: &RgbImage, x: f64, y: f64) -> Option<[f32; 3]> {
    let (w, h) = img.dimensions();
    let eps = 1e-6;
    if !(x >= -eps && y >= -eps && x <= (w - 1) as f64 + eps && y <= (h - 1) as f64 + eps) {
        return None;
    }
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let p00 = img.get_pixel(x0, y0);
    let p10 = img.get_pixel(x1, y0);
    let p01 = img.get_pixel(x0, y1);
    let p11 = img.get_pixel(x1, y1);
    let mut out = [0.0f32; 3];
    for c in 0..3 {
        let top = p00[c] as f32 * (1.0 - fx) + p10[c] as f32 * fx;
        let bot = p01[c] as f32 * (1.0 - fx) + p11[c] as f32 * fx;
        out[c] = top * (1.0 - fy) + bot * fy;
    }
    Some(out)
}

/// Bilinear sample that only uses neighbours inside `mask`; weights are
/// renormalized over the valid ones.
pub fn sample_rgb_masked(img: &RgbImage, mask: &GrayImage, x: f64, y: f64) -> Option<[f32; 3]> {
    let (w, h) = img.dimensions();
    if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
        return None;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = (x - x0) as f32;
    let fy = (y - y0) as f32;
    let mut acc = [0.0f32; 3];
    let mut wsum = 0.0f32;
    for (dx, dy, wt) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        let xi = x0 as i64 + dx;
        let yi = y0 as i64 + dy;
        if wt <= 0.0 || xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            continue;
        }
        if mask.get_pixel(xi as u32, yi as u32)[0] == 0 {
            continue;
        }
        let p = img.get_pixel(xi as u32, yi as u32);
        for c in 0..3 {
            acc[c] += wt * p[c] as f32;
        }
        wsum += wt;
    }
    if wsum < 1e-6 {
        return None;
    }
    Some([acc[0] / wsum, acc[1] / wsum, acc[2] / wsum])
}

#[inline]
pub fn to_rgb(v: [f32; 3]) -> Rgb<u8> {
    Rgb([
        v[0].round().clamp(0.0, 255.0) as u8,
        v[1].round().clamp(0.0, 255.0) as u8,
        v[2].round().clamp(0.0, 255.0) as u8,
    ])
}

/// Destination-driven warp of `src` into a `width × height` raster.
/// `dest_to_src` maps destination pixel centers to source coordinates.
pub fn warp_into(
    src: &RgbImage,
    dest_to_src: &Transform2D,
    width: u32,
    height: u32,
) -> (RgbImage, GrayImage) {
    warp_region(src, dest_to_src, 0, 0, width, height)
}

/// Like [`warp_into`] for the destination window whose top-left pixel is
/// `(x0, y0)`; output pixel `(i, j)` samples `dest_to_src(x0 + i, y0 + j)`.
pub fn warp_region(
    src: &RgbImage,
    dest_to_src: &Transform2D,
    x0: i64,
    y0: i64,
    width: u32,
    height: u32,
) -> (RgbImage, GrayImage) {
    let mut out = RgbImage::new(width, height);
    let mut mask = GrayImage::new(width, height);
    let rows: Vec<(Vec<Rgb<u8>>, Vec<u8>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut px = vec![Rgb([0, 0, 0]); width as usize];
            let mut mk = vec![0u8; width as usize];
            for x in 0..width {
                let s = dest_to_src.apply(&Point::new((x0 + x as i64) as f64, (y0 + y as i64) as f64));
                if let Some(v) = sample_rgb(src, s.x, s.y) {
                    px[x as usize] = to_rgb(v);
                    mk[x as usize] = 255;
                }
            }
            (px, mk)
        })
        .collect();
    for (y, (px, mk)) in rows.into_iter().enumerate() {
        for x in 0..width as usize {
            out.put_pixel(x as u32, y as u32, px[x]);
            mask.put_pixel(x as u32, y as u32, image::Luma([mk[x]]));
        }
    }
    (out, mask)
}

/// Rotates an RGB image by 90° clockwise (as displayed, y down).
pub fn rotate90(img: &RgbImage) -> RgbImage {
    image::imageops::rotate90(img)
}
