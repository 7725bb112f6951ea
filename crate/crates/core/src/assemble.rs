//! End-to-end assembly of straightened batch mosaics into one row mosaic.

use rayon::prelude::*;

use crate::batch::{composite_batch, MosaicCanvas, PlacedImage};
use crate::error::{Error, Result};
use crate::features::{detect_on_gray, match_features, DetectorParams, FeatureSet, DEFAULT_MAX_HAMMING, DEFAULT_RATIO};
use crate::geometry::{ransac_fit, RansacParams};
use crate::imaging::Gray;
use crate::model::{PipelineConfig, Point, StitchDirection, Transform2D, TransformKind};
use crate::straighten::{straighten, Rectification, DEFAULT_SMOOTH_WINDOW};

/// Features inside columns `[x0, x1)` of a canvas, in full-canvas coordinates.
fn band_features(id: &str, canvas: &MosaicCanvas, x0: u32, x1: u32) -> Result<FeatureSet> {
    let crop = image::imageops::crop_imm(&canvas.pixels, x0, 0, x1 - x0, canvas.height()).to_image();
    let mut set = detect_on_gray(id, &Gray::luma(&crop), &DetectorParams::default())?;
    for k in set.keypoints.iter_mut() {
        k.x += x0 as f64;
    }
    set.width = canvas.width();
    Ok(set)
}

/// Translation mapping `b` canvas coordinates into `a` canvas coordinates,
/// estimated from features in the facing edge bands. `pair` names the batches
/// in error messages.
pub fn match_batch_edges(
    a: &MosaicCanvas,
    b: &MosaicCanvas,
    cfg: &PipelineConfig,
    pair: (usize, usize),
) -> Result<Transform2D> {
    let fail = |reason: String| Error::Assembly { a: pair.0, b: pair.1, reason };
    // A short batch next to a long one still needs its whole overlap inside
    // the band, so the band follows the longer canvas.
    let band = (cfg.edge_fraction * a.width().max(b.width()) as f64).ceil() as u32;
    let ba = band.min(a.width());
    let bb = band.min(b.width());
    let fa = band_features("a", a, a.width() - ba, a.width())?;
    let fb = band_features("b", b, 0, bb)?;
    let m = match_features(&fb, &fa, DEFAULT_MAX_HAMMING, DEFAULT_RATIO);
    if m.len() < cfg.min_inliers {
        return Err(fail(format!("{} edge matches, need {}", m.len(), cfg.min_inliers)));
    }
    let params = RansacParams::from_config(cfg, TransformKind::Translation);
    let fit = ransac_fit(&m.points_a, &m.points_b, &params).map_err(|e| fail(e.to_string()))?;
    if fit.inlier_count() < cfg.min_inliers {
        return Err(fail(format!("{} inliers, need {}", fit.inlier_count(), cfg.min_inliers)));
    }
    let t = fit.transform;
    let d = t.translation_part();
    let min_adv = cfg.motion.min_advance_for((b.width(), b.height()));
    let along = StitchDirection::FORWARD_X.along(d);
    if along <= min_adv {
        return Err(fail(format!("forward advance {along:.2} px is not above {min_adv:.2} px")));
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct RowAssembly {
    pub canvas: MosaicCanvas,
    /// Offset of each batch canvas in the pre-straightening row frame.
    pub offsets: Vec<Transform2D>,
    /// Mosaic-frame origin of the pre-straightening row canvas.
    pub origin_offset: (f64, f64),
    pub rectification: Rectification,
}

impl RowAssembly {
    /// Maps a point of batch `k` to the final row mosaic.
    pub fn map_point(&self, k: usize, p: &Point) -> Point {
        let q = self.offsets[k].apply(p);
        let q = Point::new(q.x - self.origin_offset.0, q.y - self.origin_offset.1);
        self.rectification.map_point(&q)
    }
}

/// Places batches by cumulative edge translations, merges overlaps with a seam
/// and multiband blend, then straightens the result.
pub fn assemble_row(batches: &[MosaicCanvas], cfg: &PipelineConfig) -> Result<RowAssembly> {
    if batches.is_empty() {
        return Err(Error::InvalidParameter("no batches to assemble".into()));
    }
    let links: Vec<Result<Transform2D>> = (1..batches.len())
        .into_par_iter()
        .map(|k| match_batch_edges(&batches[k - 1], &batches[k], cfg, (k - 1, k)))
        .collect();
    let mut offsets = vec![Transform2D::identity()];
    for l in links {
        let l = l?;
        let prev = *offsets.last().unwrap();
        offsets.push(prev.compose(&l));
    }
    place_batches(batches, offsets, cfg)
}

/// Composites batches at known offsets (batch frame to row frame) and straightens.
pub fn place_batches(batches: &[MosaicCanvas], offsets: Vec<Transform2D>, cfg: &PipelineConfig) -> Result<RowAssembly> {
    if batches.is_empty() || offsets.len() != batches.len() {
        return Err(Error::InvalidParameter("one offset per batch required".into()));
    }
    let placements: Vec<PlacedImage> = offsets
        .iter()
        .enumerate()
        .map(|(k, t)| PlacedImage {
            index: k,
            dims: (batches[k].width(), batches[k].height()),
            global: *t,
        })
        .collect();
    let images: Vec<&image::RgbImage> = batches.iter().map(|b| &b.pixels).collect();
    let row = composite_batch(&images, &placements, StitchDirection::FORWARD_X, cfg.blend_levels)?;

    let mut heights: Vec<u32> = batches.iter().map(MosaicCanvas::height).collect();
    heights.sort_unstable();
    let h = heights[heights.len() / 2];
    let (canvas, rectification) = straighten(&row, cfg.straighten_tolerance_px, DEFAULT_SMOOTH_WINDOW, Some(h))?;
    Ok(RowAssembly {
        canvas,
        offsets,
        origin_offset: row.origin_offset,
        rectification,
    })
}
