//! Batch stitching: chained placement, joint refinement, leveling and
//! incremental seam/blend compositing into a [`MosaicCanvas`].

use std::path::Path;

use image::{GrayImage, Luma, RgbImage};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::compositor::merge_pair;
use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::imaging::warp_region;
use crate::model::{transform_line, Point, StitchDirection, Transform2D};

/// One image's placement in the batch frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedImage {
    /// Index of the source image in the caller's list.
    pub index: usize,
    pub dims: (u32, u32),
    /// Maps source pixels into the batch frame.
    pub global: Transform2D,
}

impl PlacedImage {
    /// Transformed pixel-center corners: top-left, top-right, bottom-right, bottom-left.
    pub fn footprint(&self) -> [Point; 4] {
        let (w, h) = (self.dims.0 as f64 - 1.0, self.dims.1 as f64 - 1.0);
        [
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ]
        .map(|p| self.global.apply(&p))
    }

    pub fn center(&self) -> Point {
        self.global
            .apply(&Point::new(self.dims.0 as f64 / 2.0, self.dims.1 as f64 / 2.0))
    }
}

/// Composited raster with validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicCanvas {
    pub pixels: RgbImage,
    pub mask: GrayImage,
    /// Mosaic-frame coordinate of canvas pixel (0, 0).
    pub origin_offset: (f64, f64),
    /// Footprints in the mosaic frame, in compositing order.
    pub footprints: Vec<[Point; 4]>,
}

impl MosaicCanvas {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    /// Mosaic-frame point to canvas pixel coordinates.
    pub fn to_canvas(&self, p: &Point) -> Point {
        Point::new(p.x - self.origin_offset.0, p.y - self.origin_offset.1)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.pixels().filter(|p| p[0] != 0).count()
    }

    /// Wraps a plain image as a fully valid canvas.
    pub fn from_image(img: RgbImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            pixels: img,
            mask: GrayImage::from_pixel(w, h, Luma([255])),
            origin_offset: (0.0, 0.0),
            footprints: Vec::new(),
        }
    }
}

/// `G_0 = I`, `G_k = G_{k−1} · L_k` where `L_k` maps image `k` into image `k − 1`.
///
/// The first placement is the gauge; no bounding-box shift is applied here,
/// the canvas origin absorbs negative coordinates.
pub fn chain_global_transforms(dims: &[(u32, u32)], links: &[Transform2D]) -> Result<Vec<PlacedImage>> {
    if dims.len() != links.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} images need {} links, got {}",
            dims.len(),
            dims.len().saturating_sub(1),
            links.len()
        )));
    }
    let mut out = vec![PlacedImage {
        index: 0,
        dims: dims[0],
        global: Transform2D::identity(),
    }];
    for (k, link) in links.iter().enumerate() {
        if !link.is_invertible() {
            return Err(Error::NotInvertible);
        }
        let g = out[k].global.compose(link);
        out.push(PlacedImage {
            index: k + 1,
            dims: dims[k + 1],
            global: g,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub placements: Vec<PlacedImage>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stopping rule fired.
    pub converged: bool,
}

impl RefineOutcome {
    pub fn initial_rms(&self, n_residuals: usize) -> f64 {
        (self.initial_cost / n_residuals.max(1) as f64).sqrt()
    }
}

pub const LM_MAX_ITERATIONS: usize = 50;
pub const LM_REL_TOL: f64 = 1e-6;

/// Per-image partial-affine correction `C = [[1+a, −b, tx], [b, 1+a, ty]]`.
fn correction(p: &[f64]) -> Transform2D {
    let (a, b) = (1.0 + p[0], p[1]);
    Transform2D::similarity((a * a + b * b).sqrt(), b.atan2(a), p[2], p[3])
}

fn apply_correction(p: &[f64], q: &Point) -> Vector2<f64> {
    Vector2::new(
        q.x + p[0] * q.x - p[1] * q.y + p[2],
        q.y + p[1] * q.x + p[0] * q.y + p[3],
    )
}

/// Joint Levenberg–Marquardt refinement of per-image partial-affine
/// corrections `G_k ← C_k · G_k` (`C_0 = I`). The cost is the sum over links of
/// squared batch-frame distances between matched points, which treats both
/// images of a link alike.
///
/// `links[k]` holds the matches between placements `k` and `k + 1`, oriented
/// (earlier, later).
pub fn refine_batch(placements: &[PlacedImage], links: &[MatchSet]) -> Result<RefineOutcome> {
    let n = placements.len();
    if n < 2 || links.len() != n - 1 {
        return Err(Error::InvalidParameter("refinement needs >= 2 placements and one match set per link".into()));
    }
    // Matched points already mapped through the initial placements.
    let mut obs: Vec<(usize, Point, Point)> = Vec::new();
    for (k, m) in links.iter().enumerate() {
        for (pa, pb) in m.points_a.iter().zip(&m.points_b) {
            obs.push((k, placements[k].global.apply(pa), placements[k + 1].global.apply(pb)));
        }
    }
    let np = 4 * (n - 1);
    let residuals = |x: &[f64]| -> DVector<f64> {
        let mut r = DVector::zeros(2 * obs.len());
        for (i, (k, qa, qb)) in obs.iter().enumerate() {
            let ca = if *k == 0 { qa.coords } else { apply_correction(&x[4 * (k - 1)..4 * k], qa) };
            let cb = apply_correction(&x[4 * k..4 * k + 4], qb);
            let d = ca - cb;
            r[2 * i] = d.x;
            r[2 * i + 1] = d.y;
        }
        r
    };
    // The residual is linear in the parameters, so the Jacobian is constant.
    let mut jac = DMatrix::<f64>::zeros(2 * obs.len(), np);
    for (i, (k, qa, qb)) in obs.iter().enumerate() {
        let mut put = |col0: usize, q: &Point, sign: f64| {
            jac[(2 * i, col0)] = sign * q.x;
            jac[(2 * i, col0 + 1)] = -sign * q.y;
            jac[(2 * i, col0 + 2)] = sign;
            jac[(2 * i + 1, col0)] = sign * q.y;
            jac[(2 * i + 1, col0 + 1)] = sign * q.x;
            jac[(2 * i + 1, col0 + 3)] = sign;
        };
        if *k > 0 {
            put(4 * (k - 1), qa, 1.0);
        }
        put(4 * k, qb, -1.0);
    }
    let jtj = jac.transpose() * &jac;

    let mut x = vec![0.0; np];
    let mut r = residuals(&x);
    let initial_cost = r.norm_squared();
    let mut cost = initial_cost;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < LM_MAX_ITERATIONS {
        iterations += 1;
        let g = jac.transpose() * &r;
        loop {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let step = a.lu().solve(&(-&g));
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    converged = true;
                    break;
                }
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tr = residuals(&trial);
            let tc = tr.norm_squared();
            if tc < cost {
                let rel = (cost - tc) / cost;
                x = trial;
                r = tr;
                cost = tc;
                lambda = (lambda * 0.1).max(1e-12);
                if rel < LM_REL_TOL || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left: at the optimum to working precision.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("batch refinement stopped after {iterations} iterations without converging");
    }
    let mut out = placements.to_vec();
    for k in 1..n {
        let c = correction(&x[4 * (k - 1)..4 * k]);
        out[k].global = c.compose(&placements[k].global);
    }
    Ok(RefineOutcome {
        placements: out,
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
    })
}

/// Rotates all placements about the first image center so the principal line
/// through the image centers is parallel to the stitch axis. Returns the
/// applied rotation in radians.
pub fn level_batch(placements: &[PlacedImage], dir: StitchDirection) -> Result<(Vec<PlacedImage>, f64)> {
    if placements.len() < 2 {
        return Err(Error::InvalidParameter("leveling needs >= 2 placements".into()));
    }
    let centers: Vec<Point> = placements.iter().map(PlacedImage::center).collect();
    let n = centers.len() as f64;
    let mean = centers.iter().fold(Vector2::zeros(), |s, c| s + c.coords) / n;
    let mut cov = Matrix2::zeros();
    for c in &centers {
        let d = c.coords - mean;
        cov += d * d.transpose();
    }
    if cov.trace() < 1e-18 {
        return Err(Error::Degenerate("all image centers coincide"));
    }
    let eig = cov.symmetric_eigen();
    let i = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let mut d: Vector2<f64> = eig.eigenvectors.column(i).into_owned();
    // Orient along the sequence.
    if d.dot(&(centers[centers.len() - 1] - centers[0])) < 0.0 {
        d = -d;
    }
    let axis = match dir.axis {
        crate::model::StitchAxis::Horizontal => Vector2::new(dir.sign as f64, 0.0),
        crate::model::StitchAxis::Vertical => Vector2::new(0.0, dir.sign as f64),
    };
    let angle = (d.x * axis.y - d.y * axis.x).atan2(d.dot(&axis));
    let c0 = centers[0];
    let level = Transform2D::translation(c0.x, c0.y)
        .compose(&Transform2D::similarity(1.0, angle, 0.0, 0.0))
        .compose(&Transform2D::translation(-c0.x, -c0.y));
    let out = placements
        .iter()
        .map(|p| PlacedImage {
            global: level.compose(&p.global),
            ..*p
        })
        .collect();
    Ok((out, angle))
}

/// Integer canvas bounds `(x0, y0, x1, y1)` covering all footprints.
fn bounds(footprints: &[[Point; 4]]) -> (i64, i64, i64, i64) {
    let mut b = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for f in footprints {
        for p in f {
            b.0 = b.0.min(p.x.floor() as i64);
            b.1 = b.1.min(p.y.floor() as i64);
            b.2 = b.2.max(p.x.ceil() as i64);
            b.3 = b.3.max(p.y.ceil() as i64);
        }
    }
    b
}

/// A warped source positioned on the canvas.
struct Warped {
    x0: u32,
    y0: u32,
    pixels: RgbImage,
    mask: GrayImage,
}

fn crop(img: &RgbImage, mask: &GrayImage, x0: u32, y0: u32, w: u32, h: u32) -> (RgbImage, GrayImage) {
    (
        image::imageops::crop_imm(img, x0, y0, w, h).to_image(),
        image::imageops::crop_imm(mask, x0, y0, w, h).to_image(),
    )
}

/// Inverse-warps every image and merges it into the running canvas in order,
/// with a seam and multiband blend over each overlap.
pub fn composite_batch(
    images: &[&RgbImage],
    placements: &[PlacedImage],
    dir: StitchDirection,
    levels: usize,
) -> Result<MosaicCanvas> {
    if images.is_empty() || images.len() != placements.len() {
        return Err(Error::InvalidParameter("one image per placement required".into()));
    }
    let footprints: Vec<[Point; 4]> = placements.iter().map(PlacedImage::footprint).collect();
    let (bx0, by0, bx1, by1) = bounds(&footprints);
    let (cw, ch) = ((bx1 - bx0 + 1) as u32, (by1 - by0 + 1) as u32);
    if cw as u64 * ch as u64 > 400_000_000 {
        return Err(Error::InvalidParameter(format!("canvas {cw}x{ch} is implausibly large")));
    }

    let warped: Vec<Result<Warped>> = placements
        .par_iter()
        .zip(images.par_iter())
        .zip(footprints.par_iter())
        .map(|((p, img), f)| {
            let (x0, y0, x1, y1) = bounds(std::slice::from_ref(f));
            let inv = p.global.inverse()?;
            let (pixels, mask) = warp_region(img, &inv, x0, y0, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
            Ok(Warped {
                x0: (x0 - bx0) as u32,
                y0: (y0 - by0) as u32,
                pixels,
                mask,
            })
        })
        .collect();

    let mut canvas = RgbImage::new(cw, ch);
    let mut cmask = GrayImage::new(cw, ch);
    for (k, w) in warped.into_iter().enumerate() {
        let w = w?;
        let (ww, wh) = w.pixels.dimensions();
        let (ca, cma) = crop(&canvas, &cmask, w.x0, w.y0, ww, wh);
        let (merged, mmask) = if k == 0 {
            (w.pixels, w.mask)
        } else {
            let (out, m, _) = merge_pair(&ca, &w.pixels, &cma, &w.mask, dir, levels)?;
            (out, m)
        };
        for y in 0..wh {
            for x in 0..ww {
                if mmask.get_pixel(x, y)[0] != 0 {
                    canvas.put_pixel(w.x0 + x, w.y0 + y, *merged.get_pixel(x, y));
                    cmask.put_pixel(w.x0 + x, w.y0 + y, Luma([255]));
                }
            }
        }
    }
    Ok(MosaicCanvas {
        pixels: canvas,
        mask: cmask,
        origin_offset: (bx0 as f64, by0 as f64),
        footprints,
    })
}

/// Writes `<stem>.png` and `<stem>.txt` (one `id` plus 3×3 transform per line).
pub fn write_debug_dump(dir: &Path, stem: &str, canvas: &MosaicCanvas, entries: &[(String, Transform2D)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    canvas.pixels.save(dir.join(format!("{stem}.png")))?;
    let text: String = entries.iter().map(|(id, t)| transform_line(id, t) + "\n").collect();
    std::fs::write(dir.join(format!("{stem}.txt")), text)?;
    Ok(())
}
