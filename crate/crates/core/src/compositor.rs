//! Seam selection and multiband blending inside the overlap of two rasters.
//!
//! Both inputs are same-sized rasters in a shared frame with validity masks.
//! `a` is the earlier (already composited) content, `b` the incoming image.

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::{to_rgb, Gray};
use crate::model::{StitchAxis, StitchDirection};

/// Gradient weight in the seam cost.
pub const GRADIENT_WEIGHT: f64 = 0.5;
/// Cost of routing the seam through a pixel outside the overlap.
pub const OUTSIDE_COST: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Outside,
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && y >= self.y0 && x < self.x0 + self.width && y < self.y0 + self.height
    }
}

/// Labels over the overlap bounding box plus the seam path.
#[derive(Debug, Clone, PartialEq)]
pub struct SeamLabeling {
    pub rect: Rect,
    /// Row-major over `rect`.
    pub labels: Vec<Label>,
    /// Seam pixels in raster coordinates, ordered across the overlap.
    pub path: Vec<(u32, u32)>,
    pub cost: f64,
}

impl SeamLabeling {
    pub fn label(&self, x: u32, y: u32) -> Label {
        if !self.rect.contains(x, y) {
            return Label::Outside;
        }
        self.labels[((y - self.rect.y0) * self.rect.width + (x - self.rect.x0)) as usize]
    }
}

#[inline]
fn valid(m: &GrayImage, x: u32, y: u32) -> bool {
    m.get_pixel(x, y)[0] != 0
}

/// Bounding box of pixels valid in both masks.
pub fn overlap_rect(mask_a: &GrayImage, mask_b: &GrayImage) -> Option<Rect> {
    let (w, h) = mask_a.dimensions();
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if valid(mask_a, x, y) && valid(mask_b, x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != u32::MAX).then(|| Rect {
        x0,
        y0,
        width: x1 - x0 + 1,
        height: y1 - y0 + 1,
    })
}

fn intensity(img: &RgbImage, x: u32, y: u32) -> f64 {
    let p = img.get_pixel(x, y);
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

fn grad_l1(img: &RgbImage, x: u32, y: u32) -> f64 {
    let (w, h) = img.dimensions();
    let i = intensity(img, x, y);
    let gx = if x + 1 < w { intensity(img, x + 1, y) - i } else { 0.0 };
    let gy = if y + 1 < h { intensity(img, x, y + 1) - i } else { 0.0 };
    gx.abs() + gy.abs()
}

/// Per-pixel seam cost over `rect`, row-major.
pub fn seam_cost_field(a: &RgbImage, b: &RgbImage, mask_a: &GrayImage, mask_b: &GrayImage, rect: Rect) -> Vec<f64> {
    let mut out = Vec::with_capacity((rect.width * rect.height) as usize);
    for y in rect.y0..rect.y0 + rect.height {
        for x in rect.x0..rect.x0 + rect.width {
            if !(valid(mask_a, x, y) && valid(mask_b, x, y)) {
                out.push(OUTSIDE_COST);
                continue;
            }
            let pa = a.get_pixel(x, y);
            let pb = b.get_pixel(x, y);
            let color: f64 = (0..3).map(|c| (pa[c] as f64 - pb[c] as f64).abs()).sum();
            out.push(color + GRADIENT_WEIGHT * (grad_l1(a, x, y) + grad_l1(b, x, y)));
        }
    }
    out
}

/// Minimum-cost path with one column per row and column steps in {−1, 0, +1}.
/// Returns the column for every row and the summed cost. Ties prefer the
/// smaller column.
pub fn min_cost_seam(cost: &[f64], width: usize, height: usize) -> (Vec<usize>, f64) {
    assert!(width > 0 && height > 0 && cost.len() == width * height);
    let mut acc = cost[..width].to_vec();
    let mut back = vec![0usize; width * height];
    for y in 1..height {
        let mut next = vec![0.0; width];
        for x in 0..width {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(width - 1);
            let mut best = lo;
            for c in lo..=hi {
                if acc[c] < acc[best] {
                    best = c;
                }
            }
            next[x] = acc[best] + cost[y * width + x];
            back[y * width + x] = best;
        }
        acc = next;
    }
    let mut x = (0..width).fold(0, |b, c| if acc[c] < acc[b] { c } else { b });
    let total = acc[x];
    let mut path = vec![0; height];
    for y in (0..height).rev() {
        path[y] = x;
        x = back[y * width + x];
    }
    (path, total)
}

/// Dynamic-programming seam through the overlap, perpendicular to the stitch axis.
pub fn find_seam(
    a: &RgbImage,
    b: &RgbImage,
    mask_a: &GrayImage,
    mask_b: &GrayImage,
    dir: StitchDirection,
) -> Result<SeamLabeling> {
    let rect = overlap_rect(mask_a, mask_b).ok_or(Error::EmptyOverlap)?;
    let field = seam_cost_field(a, b, mask_a, mask_b, rect);
    let (rw, rh) = (rect.width as usize, rect.height as usize);

    // The DP runs along "rows" that are perpendicular to the stitch axis.
    let (path, cost) = match dir.axis {
        StitchAxis::Horizontal => min_cost_seam(&field, rw, rh),
        StitchAxis::Vertical => {
            let mut t = vec![0.0; rw * rh];
            for y in 0..rh {
                for x in 0..rw {
                    t[x * rh + y] = field[y * rw + x];
                }
            }
            min_cost_seam(&t, rh, rw)
        }
    };

    let mut labels = Vec::with_capacity(rw * rh);
    for y in 0..rh {
        for x in 0..rw {
            let (gx, gy) = (rect.x0 + x as u32, rect.y0 + y as u32);
            let la = valid(mask_a, gx, gy);
            let lb = valid(mask_b, gx, gy);
            let l = match (la, lb) {
                (false, false) => Label::Outside,
                (true, false) => Label::A,
                (false, true) => Label::B,
                (true, true) => {
                    let (along, seam) = match dir.axis {
                        StitchAxis::Horizontal => (x, path[y]),
                        StitchAxis::Vertical => (y, path[x]),
                    };
                    let earlier = if dir.sign > 0 { along <= seam } else { along >= seam };
                    if earlier {
                        Label::A
                    } else {
                        Label::B
                    }
                }
            };
            labels.push(l);
        }
    }
    let path = match dir.axis {
        StitchAxis::Horizontal => path.iter().enumerate().map(|(y, &x)| (rect.x0 + x as u32, rect.y0 + y as u32)).collect(),
        StitchAxis::Vertical => path.iter().enumerate().map(|(x, &y)| (rect.x0 + x as u32, rect.y0 + y as u32)).collect(),
    };
    Ok(SeamLabeling { rect, labels, path, cost })
}

const KERNEL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn blur(g: &Gray) -> Gray {
    let (w, h) = (g.width, g.height);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = Gray::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, wt) in KERNEL.iter().enumerate() {
                s += wt * g.get(clamp(x as isize + k as isize - 2, w), y);
            }
            tmp.set(x, y, s);
        }
    }
    let mut out = Gray::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, wt) in KERNEL.iter().enumerate() {
                s += wt * tmp.get(x, clamp(y as isize + k as isize - 2, h));
            }
            out.set(x, y, s);
        }
    }
    out
}

/// Blur then keep every second sample.
pub fn reduce(g: &Gray) -> Gray {
    let b = blur(g);
    let (w, h) = (g.width.div_ceil(2), g.height.div_ceil(2));
    let mut out = Gray::new(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, b.get(2 * x, 2 * y));
        }
    }
    out
}

/// Zero-insertion upsampling to `width × height` followed by the same kernel
/// with gain 4.
pub fn expand(g: &Gray, width: usize, height: usize) -> Gray {
    let mut up = Gray::new(width, height);
    for y in 0..g.height {
        for x in 0..g.width {
            if 2 * x < width && 2 * y < height {
                up.set(2 * x, 2 * y, 4.0 * g.get(x, y));
            }
        }
    }
    // Zero padding here (not replication) keeps the sparse grid consistent.
    let mut tmp = Gray::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let mut s = 0.0;
            for (k, wt) in KERNEL.iter().enumerate() {
                let xx = x as isize + k as isize - 2;
                if xx >= 0 && (xx as usize) < width {
                    s += wt * up.get(xx as usize, y);
                }
            }
            tmp.set(x, y, s);
        }
    }
    let mut out = Gray::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let mut s = 0.0;
            for (k, wt) in KERNEL.iter().enumerate() {
                let yy = y as isize + k as isize - 2;
                if yy >= 0 && (yy as usize) < height {
                    s += wt * tmp.get(x, yy as usize);
                }
            }
            out.set(x, y, s);
        }
    }
    out
}

/// Number of pyramid reductions used for a requested level count and overlap
/// size. The influence radius of `n` reductions is `2^(n+2) − 2` px, so
/// `levels − 2` reductions keep every change within `2^levels` of the seam.
pub fn reductions_for(levels: usize, width: u32, height: u32) -> usize {
    let mut n = levels.saturating_sub(2);
    let min_side = width.min(height) as usize;
    while n > 0 && (1usize << n) > min_side {
        n -= 1;
    }
    n
}

/// Laplacian-pyramid blend of the two rasters inside `labeling.rect`.
/// Returns the blended raster, equal to `a` where only `a` is valid and to
/// `b` where only `b` is valid, except within the blend band of a label change.
pub fn multiband_blend(
    a: &RgbImage,
    b: &RgbImage,
    mask_a: &GrayImage,
    mask_b: &GrayImage,
    labeling: &SeamLabeling,
    levels: usize,
) -> RgbImage {
    let r = labeling.rect;
    let (w, h) = (r.width as usize, r.height as usize);
    let n = reductions_for(levels.max(1), r.width, r.height);

    // Weight of `a` per level.
    let mut m0 = Gray::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = if labeling.labels[y * w + x] == Label::A { 1.0 } else { 0.0 };
            m0.set(x, y, v);
        }
    }
    let mut masks = vec![blur(&m0)];
    for l in 0..n {
        let next = reduce(&masks[l]);
        masks.push(next);
    }

    let mut out = b.clone();
    for (x, y, p) in out.enumerate_pixels_mut() {
        if !valid(mask_b, x, y) && valid(mask_a, x, y) {
            *p = *a.get_pixel(x, y);
        }
    }

    for c in 0..3 {
        // Base is `b` filled with `a`; the difference is zero unless both are valid.
        let mut base = Gray::new(w, h);
        let mut diff = Gray::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let (gx, gy) = (r.x0 + x as u32, r.y0 + y as u32);
                let va = valid(mask_a, gx, gy);
                let vb = valid(mask_b, gx, gy);
                let pa = a.get_pixel(gx, gy)[c] as f32;
                let pb = b.get_pixel(gx, gy)[c] as f32;
                let (bv, dv) = match (va, vb) {
                    (true, true) => (pb, pa - pb),
                    (true, false) => (pa, 0.0),
                    (false, true) => (pb, 0.0),
                    (false, false) => (0.0, 0.0),
                };
                base.set(x, y, bv);
                diff.set(x, y, dv);
            }
        }
        let mut gauss = vec![diff];
        for l in 0..n {
            let next = reduce(&gauss[l]);
            gauss.push(next);
        }
        // Collapse from the top: acc = m_n G_n; acc = expand(acc) + m_l L_l.
        let mut acc = gauss[n].clone();
        for (v, m) in acc.data.iter_mut().zip(&masks[n].data) {
            *v *= m;
        }
        for l in (0..n).rev() {
            let (lw, lh) = (gauss[l].width, gauss[l].height);
            let up_next = expand(&gauss[l + 1], lw, lh);
            let up_acc = expand(&acc, lw, lh);
            let mut cur = Gray::new(lw, lh);
            for i in 0..lw * lh {
                let lap = gauss[l].data[i] - up_next.data[i];
                cur.data[i] = up_acc.data[i] + masks[l].data[i] * lap;
            }
            acc = cur;
        }
        for y in 0..h {
            for x in 0..w {
                if labeling.labels[y * w + x] == Label::Outside {
                    continue;
                }
                let (gx, gy) = (r.x0 + x as u32, r.y0 + y as u32);
                let v = base.get(x, y) + acc.get(x, y);
                out.get_pixel_mut(gx, gy)[c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Seam plus blend in one call; returns the merged raster and the union mask.
pub fn merge_pair(
    a: &RgbImage,
    b: &RgbImage,
    mask_a: &GrayImage,
    mask_b: &GrayImage,
    dir: StitchDirection,
    levels: usize,
) -> Result<(RgbImage, GrayImage, SeamLabeling)> {
    let seam = find_seam(a, b, mask_a, mask_b, dir)?;
    let out = multiband_blend(a, b, mask_a, mask_b, &seam, levels);
    let mut mask = mask_a.clone();
    for (x, y, p) in mask.enumerate_pixels_mut() {
        if valid(mask_b, x, y) {
            p[0] = 255;
        }
    }
    Ok((out, mask, seam))
}

/// Single blurred-mask feather of the two inputs over the labeled rect.
#[doc(hidden)]
pub fn feather_reference(a: &RgbImage, b: &RgbImage, labeling: &SeamLabeling) -> Vec<[u8; 3]> {
    let r = labeling.rect;
    let (w, h) = (r.width as usize, r.height as usize);
    let mut m = Gray::new(w, h);
    for i in 0..w * h {
        m.data[i] = if labeling.labels[i] == Label::A { 1.0 } else { 0.0 };
    }
    let m = blur(&m);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = (r.x0 + x as u32, r.y0 + y as u32);
            let pa = a.get_pixel(gx, gy);
            let pb = b.get_pixel(gx, gy);
            let wt = m.get(x, y);
            let px = to_rgb([
                wt * pa[0] as f32 + (1.0 - wt) * pb[0] as f32,
                wt * pa[1] as f32 + (1.0 - wt) * pb[1] as f32,
                wt * pa[2] as f32 + (1.0 - wt) * pb[2] as f32,
            ]);
            out.push(px.0);
        }
    }
    out
}
