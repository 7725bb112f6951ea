//! End-to-end orchestration: folder ingest, chaining, batch stitching, row
//! assembly, per-image point maps and report files.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use log::{debug, info, warn};
use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::assemble::assemble_row;
use crate::batch::{chain_global_transforms, composite_batch, level_batch, refine_batch, write_debug_dump, MosaicCanvas};
use crate::error::{Error, Result};
use crate::features::{
    detect_features, load_external_matches, match_features, restrict_to_edge, FeatureSet, MatchSet,
    DEFAULT_GRID, DEFAULT_MAX_HAMMING, DEFAULT_MAX_PER_CELL, DEFAULT_RATIO,
};
use crate::gate::{accept_pair, verdict_line};
use crate::georef::{georeference_report, read_geo_sidecar, register_image_centers, ControlPoint, PlacedFrame, RegressionReport};
use crate::model::{transform_line, ImageRecord, PipelineConfig, Point, StitchAxis, StitchDirection, Transform2D};
use crate::sequencer::{build_batches, build_chain, Attempt, ChainMode, GapReport};
use crate::straighten::{rescale_to_height, straighten, Rectification, DEFAULT_SMOOTH_WINDOW};

const IMAGE_EXTS: [&str; 3] = ["png", "jpg", "jpeg"];
const UNSUPPORTED_EXTS: [&str; 6] = ["bmp", "tif", "tiff", "gif", "webp", "heic"];
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const GEO_FILE: &str = "geo.txt";

/// Image files of `dir` in capture order: the `manifest.txt` listing when
/// present, lexicographic file name order otherwise.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        let text = fs::read_to_string(&manifest)?;
        return text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let p = dir.join(l);
                if p.is_file() {
                    Ok(p)
                } else {
                    Err(Error::InvalidImage {
                        id: l.to_string(),
                        reason: "listed in manifest but missing".into(),
                    })
                }
            })
            .collect();
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if !p.is_file() {
            continue;
        }
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        if IMAGE_EXTS.contains(&ext.as_str()) {
            out.push(p);
        } else if UNSUPPORTED_EXTS.contains(&ext.as_str()) {
            return Err(Error::InvalidImage {
                id: p.display().to_string(),
                reason: format!("unsupported image format `.{ext}`; use PNG or JPEG"),
            });
        }
    }
    out.sort();
    Ok(out)
}

fn image_id(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

/// Loads the folder as 8-bit RGB records, attaching geo data from `geo` (or
/// `<dir>/geo.txt` when present).
pub fn load_folder(dir: &Path, geo: Option<&Path>) -> Result<Vec<ImageRecord>> {
    let paths = list_images(dir)?;
    let records: Vec<Result<ImageRecord>> = paths
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let img = image::open(p)?.to_rgb8();
            ImageRecord::new(image_id(p), k, img)
        })
        .collect();
    let mut records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let default_geo = dir.join(GEO_FILE);
    let geo_path = geo.map(Path::to_path_buf).or_else(|| default_geo.exists().then_some(default_geo));
    if let Some(gp) = geo_path {
        let table: HashMap<String, _> = read_geo_sidecar(&gp)?.into_iter().collect();
        for r in records.iter_mut() {
            r.geo = table.get(&r.id).copied();
        }
    }
    Ok(records)
}

/// Rigid relabelling of pixel axes so the stitch direction becomes `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orientation(pub StitchDirection);

impl Orientation {
    /// Original image pixel -> canonical pixel, for an image of `dims`.
    pub fn to_canonical(&self, dims: (u32, u32)) -> Transform2D {
        let (w, h) = (dims.0 as f64 - 1.0, dims.1 as f64 - 1.0);
        let m = match (self.0.axis, self.0.sign > 0) {
            (StitchAxis::Horizontal, true) => return Transform2D::identity(),
            (StitchAxis::Horizontal, false) => Matrix3::new(-1.0, 0.0, w, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
            (StitchAxis::Vertical, true) => Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
            (StitchAxis::Vertical, false) => Matrix3::new(0.0, -1.0, h, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        };
        Transform2D::classify(m)
    }

    /// Canonical pixel -> output pixel for a canonical raster of `dims`.
    pub fn from_canonical(&self, dims: (u32, u32)) -> Transform2D {
        let out_dims = self.output_dims(dims);
        self.to_canonical(out_dims).inverse().expect("axis relabelling is invertible")
    }

    fn output_dims(&self, canon: (u32, u32)) -> (u32, u32) {
        match self.0.axis {
            StitchAxis::Horizontal => canon,
            StitchAxis::Vertical => (canon.1, canon.0),
        }
    }

    fn canonical_dims(&self, dims: (u32, u32)) -> (u32, u32) {
        match self.0.axis {
            StitchAxis::Horizontal => dims,
            StitchAxis::Vertical => (dims.1, dims.0),
        }
    }

    fn remap(src: &RgbImage, out_dims: (u32, u32), out_to_src: &Transform2D) -> RgbImage {
        RgbImage::from_fn(out_dims.0, out_dims.1, |x, y| {
            let s = out_to_src.apply(&Point::new(x as f64, y as f64));
            *src.get_pixel(s.x.round() as u32, s.y.round() as u32)
        })
    }

    pub fn image_to_canonical(&self, img: &RgbImage) -> RgbImage {
        if self.0 == StitchDirection::FORWARD_X {
            return img.clone();
        }
        let dims = img.dimensions();
        let back = self.to_canonical(dims).inverse().expect("invertible");
        Self::remap(img, self.canonical_dims(dims), &back)
    }

    pub fn canonical_to_output(&self, img: &RgbImage) -> RgbImage {
        if self.0 == StitchDirection::FORWARD_X {
            return img.clone();
        }
        let dims = img.dimensions();
        let out_dims = self.output_dims(dims);
        Self::remap(img, out_dims, &self.to_canonical(out_dims))
    }
}

#[derive(Debug, Clone, Default)]
pub struct StitchOptions {
    pub strict: bool,
    /// Directory of `<a_id>__<b_id>.txt` match files replacing built-in matching.
    pub external_matches: Option<PathBuf>,
    pub debug_dumps: Option<PathBuf>,
}

/// Location of one used image inside the stitched structure.
#[derive(Debug, Clone, Copy)]
struct FrameSlot {
    batch: usize,
    /// Canonical image pixel -> batch frame.
    placement: Transform2D,
}

#[derive(Debug, Clone)]
struct BatchMap {
    origin: (f64, f64),
    rectification: Rectification,
    rescale: Transform2D,
}

/// Point maps from input images into the final mosaic.
#[derive(Debug, Clone)]
pub struct MosaicMap {
    orientation: Orientation,
    dims: HashMap<usize, (u32, u32)>,
    slots: HashMap<usize, FrameSlot>,
    batches: Vec<BatchMap>,
    row_offsets: Vec<Transform2D>,
    row_origin: (f64, f64),
    row_rect: Rectification,
    canonical_dims: (u32, u32),
}

impl MosaicMap {
    /// Maps pixel `p` of input image `index` into the output mosaic; `None`
    /// for images that are not part of the mosaic.
    pub fn map_point(&self, index: usize, p: &Point) -> Option<Point> {
        let slot = self.slots.get(&index)?;
        let dims = self.dims[&index];
        let q = self.orientation.to_canonical(dims).apply(p);
        let q = slot.placement.apply(&q);
        let b = &self.batches[slot.batch];
        let q = b.rectification.map_point(&Point::new(q.x - b.origin.0, q.y - b.origin.1));
        let q = b.rescale.apply(&q);
        let q = self.row_offsets[slot.batch].apply(&q);
        let q = self.row_rect.map_point(&Point::new(q.x - self.row_origin.0, q.y - self.row_origin.1));
        Some(self.orientation.from_canonical(self.canonical_dims).apply(&q))
    }

    /// Affine linearization of the map at the image center: exact at the
    /// center, derivative by central differences.
    pub fn local_transform(&self, index: usize) -> Option<Transform2D> {
        let (w, h) = *self.dims.get(&index)?;
        let c = Point::new((w - 1) as f64 / 2.0, (h - 1) as f64 / 2.0);
        let d = 4.0;
        let f = |dx: f64, dy: f64| self.map_point(index, &Point::new(c.x + dx, c.y + dy));
        let (px, mx, py, my, c0) = (f(d, 0.0)?, f(-d, 0.0)?, f(0.0, d)?, f(0.0, -d)?, f(0.0, 0.0)?);
        let jx = (px - mx) / (2.0 * d);
        let jy = (py - my) / (2.0 * d);
        let tx = c0.x - jx.x * c.x - jy.x * c.y;
        let ty = c0.y - jx.y * c.x - jy.y * c.y;
        Some(Transform2D::classify(Matrix3::new(jx.x, jy.x, tx, jx.y, jy.y, ty, 0.0, 0.0, 1.0)))
    }
}

#[derive(Debug, Clone)]
pub struct StitchOutput {
    pub mosaic: RgbImage,
    pub ids: Vec<String>,
    pub used: Vec<usize>,
    pub skipped: Vec<usize>,
    pub gap: Option<GapReport>,
    pub attempts: Vec<Attempt>,
    pub map: MosaicMap,
    /// Composed transform per used image, in `used` order.
    pub transforms: Vec<(usize, Transform2D)>,
    pub centers: Vec<ControlPoint>,
    pub georef: Option<RegressionReport>,
    pub batch_count: usize,
}

fn pair_matches(
    images: &[ImageRecord],
    forward: &[FeatureSet],
    trailing: &[FeatureSet],
    external: Option<&Path>,
    i: usize,
    j: usize,
) -> Result<MatchSet> {
    match external {
        Some(dir) => {
            let p = dir.join(format!("{}__{}.txt", images[i].id, images[j].id));
            if p.exists() {
                load_external_matches(&p, &images[i].id, &images[j].id)
            } else {
                debug!("no match file for {} {}", images[i].id, images[j].id);
                Ok(MatchSet::default())
            }
        }
        None => Ok(match_features(&forward[i], &trailing[j], DEFAULT_MAX_HAMMING, DEFAULT_RATIO)),
    }
}

struct StitchedBatch {
    canvas: MosaicCanvas,
    map: BatchMap,
    placements: Vec<(usize, Transform2D)>,
}

fn stitch_batch(
    k: usize,
    images: &[RgbImage],
    ids: &[String],
    members: &[usize],
    links: &[Transform2D],
    link_matches: &[MatchSet],
    cfg: &PipelineConfig,
    debug_dir: Option<&Path>,
) -> Result<StitchedBatch> {
    let fail = |e: Error| Error::Assembly {
        a: k,
        b: k,
        reason: format!("batch stitching failed: {e}"),
    };
    let dims: Vec<(u32, u32)> = members.iter().map(|&i| images[i].dimensions()).collect();
    let chained = chain_global_transforms(&dims, links).map_err(fail)?;
    let refined = refine_batch(&chained, link_matches).map_err(fail)?;
    if !refined.converged {
        warn!("batch {k}: refinement hit the iteration cap");
    }
    let (leveled, angle) = level_batch(&refined.placements, StitchDirection::FORWARD_X).map_err(fail)?;
    debug!("batch {k}: leveled by {:.3} deg", angle.to_degrees());
    let srcs: Vec<&RgbImage> = members.iter().map(|&i| &images[i]).collect();
    let canvas = composite_batch(&srcs, &leveled, StitchDirection::FORWARD_X, cfg.blend_levels).map_err(fail)?;
    if let Some(dir) = debug_dir {
        let entries: Vec<(String, Transform2D)> =
            members.iter().zip(&leveled).map(|(&i, p)| (ids[i].clone(), p.global)).collect();
        write_debug_dump(dir, &format!("batch_{k:03}"), &canvas, &entries)?;
    }
    let (straight, rectification) =
        straighten(&canvas, cfg.straighten_tolerance_px, DEFAULT_SMOOTH_WINDOW, None).map_err(fail)?;
    Ok(StitchedBatch {
        canvas: straight,
        map: BatchMap {
            origin: canvas.origin_offset,
            rectification,
            rescale: Transform2D::identity(),
        },
        placements: members.iter().zip(&leveled).map(|(&i, p)| (i, p.global)).collect(),
    })
}

/// Runs the whole pipeline on ordered images.
pub fn stitch_images(images: &[ImageRecord], cfg: &PipelineConfig, opts: &StitchOptions) -> Result<StitchOutput> {
    if images.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 images, got {}", images.len())));
    }
    let cfg = cfg.clone().validate()?;
    let orientation = Orientation(cfg.motion.direction());
    // Everything below runs in canonical (+x) orientation.
    let mut ccfg = cfg.clone();
    ccfg.motion.stitch_axis = StitchAxis::Horizontal;
    ccfg.motion.stitch_sign = 1;
    let canon: Vec<ImageRecord> = images
        .par_iter()
        .map(|r| ImageRecord {
            pixels: orientation.image_to_canonical(&r.pixels),
            ..r.clone()
        })
        .collect();
    let ids: Vec<String> = canon.iter().map(|r| r.id.clone()).collect();

    let (forward, trailing): (Vec<FeatureSet>, Vec<FeatureSet>) = if opts.external_matches.is_some() {
        (Vec::new(), Vec::new())
    } else {
        let sets = canon
            .par_iter()
            .map(|r| {
                let f = detect_features(r, DEFAULT_MAX_PER_CELL, DEFAULT_GRID)?;
                Ok((
                    restrict_to_edge(&f, StitchDirection::FORWARD_X, ccfg.edge_fraction, true),
                    restrict_to_edge(&f, StitchDirection::FORWARD_X, ccfg.edge_fraction, false),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        sets.into_iter().unzip()
    };
    info!("features ready for {} images", canon.len());

    let mut match_error = None;
    let mode = if opts.strict { ChainMode::Strict } else { ChainMode::Partial };
    let outcome = build_chain(canon.len(), ccfg.window, mode, |i, j| {
        match pair_matches(&canon, &forward, &trailing, opts.external_matches.as_deref(), i, j) {
            Ok(raw) => accept_pair(&canon[i], &canon[j], &raw, &ccfg),
            Err(e) => {
                match_error.get_or_insert(e);
                crate::model::PairVerdict::rejected(crate::model::RejectReason::TooFewPrefilter, MatchSet::default())
            }
        }
    });
    if let Some(e) = match_error {
        return Err(e);
    }
    let outcome = outcome?;
    let chain = outcome.chain;
    if let Some(g) = &outcome.gap {
        warn!("chain break: {g}");
    }
    if let Some(t) = &outcome.tail {
        info!("chain ends before the last image: {t}");
    }
    let used = chain.used_indices.clone();
    let skipped: Vec<usize> = (0..canon.len()).filter(|i| !used.contains(i)).collect();
    info!("chain uses {} of {} images", used.len(), canon.len());

    let pixels: Vec<RgbImage> = canon.iter().map(|r| r.pixels.clone()).collect();
    let position: HashMap<usize, usize> = used.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let batches = build_batches(&chain, ccfg.batch_size);

    let mut stitched: Vec<StitchedBatch> = if batches.is_empty() {
        // A single usable image: it is the mosaic.
        vec![StitchedBatch {
            canvas: MosaicCanvas::from_image(pixels[used[0]].clone()),
            map: BatchMap {
                origin: (0.0, 0.0),
                rectification: straighten(
                    &MosaicCanvas::from_image(pixels[used[0]].clone()),
                    ccfg.straighten_tolerance_px,
                    DEFAULT_SMOOTH_WINDOW,
                    None,
                )?
                .1,
                rescale: Transform2D::identity(),
            },
            placements: vec![(used[0], Transform2D::identity())],
        }]
    } else {
        batches
            .par_iter()
            .enumerate()
            .map(|(k, b)| {
                let p0 = position[&b.first()];
                let link_matches: Vec<MatchSet> =
                    chain.links[p0..p0 + b.links.len()].iter().map(|l| l.verdict.matches.clone()).collect();
                stitch_batch(k, &pixels, &ids, &b.images, &b.links, &link_matches, &ccfg, opts.debug_dumps.as_deref())
            })
            .collect::<Result<Vec<_>>>()?
    };

    let mut heights: Vec<u32> = stitched.iter().map(|s| s.canvas.height()).collect();
    heights.sort_unstable();
    let target = heights[heights.len() / 2];
    for s in stitched.iter_mut() {
        let (c, fwd) = rescale_to_height(&s.canvas, target)?;
        s.canvas = c;
        s.map.rescale = fwd;
    }
    let canvases: Vec<MosaicCanvas> = stitched.iter().map(|s| s.canvas.clone()).collect();
    let row = assemble_row(&canvases, &ccfg)?;
    info!("row mosaic {}x{}", row.canvas.width(), row.canvas.height());

    let mut slots = HashMap::new();
    for (k, s) in stitched.iter().enumerate() {
        for &(i, g) in &s.placements {
            slots.entry(i).or_insert(FrameSlot { batch: k, placement: g });
        }
    }
    let canonical_dims = (row.canvas.width(), row.canvas.height());
    let map = MosaicMap {
        orientation,
        dims: images.iter().enumerate().map(|(i, r)| (i, r.dims())).collect(),
        slots,
        batches: stitched.into_iter().map(|s| s.map).collect(),
        row_offsets: row.offsets,
        row_origin: row.origin_offset,
        row_rect: row.rectification,
        canonical_dims,
    };
    let mosaic = orientation.canonical_to_output(&row.canvas.pixels);

    let transforms: Vec<(usize, Transform2D)> =
        used.iter().filter_map(|&i| map.local_transform(i).map(|t| (i, t))).collect();
    let placed: Vec<PlacedFrame> = transforms
        .iter()
        .map(|&(i, t)| PlacedFrame {
            id: images[i].id.clone(),
            dims: images[i].dims(),
            geo: images[i].geo,
            to_mosaic: t,
        })
        .collect();
    let (centers, _) = register_image_centers(&placed);
    let georef = if centers.len() >= 2 {
        match georeference_report(&centers, true) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("georeference report skipped: {e}");
                None
            }
        }
    } else {
        None
    };

    Ok(StitchOutput {
        mosaic,
        ids: images.iter().map(|r| r.id.clone()).collect(),
        used,
        skipped,
        gap: outcome.gap,
        attempts: outcome.attempts,
        map,
        transforms,
        centers,
        georef,
        batch_count: batches.len().max(1),
    })
}

/// Writes `mosaic.png`, `transforms.txt`, `used.txt`, `skipped.txt`,
/// `verdicts.txt`, plus `gaps.txt`, `centers.txt` and `georef.txt` when relevant.
pub fn write_outputs(dir: &Path, out: &StitchOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.mosaic.save(dir.join("mosaic.png"))?;
    let lines = |v: Vec<String>| v.into_iter().map(|l| l + "\n").collect::<String>();
    fs::write(
        dir.join("transforms.txt"),
        lines(out.transforms.iter().map(|(i, t)| transform_line(&out.ids[*i], t)).collect()),
    )?;
    fs::write(dir.join("used.txt"), lines(out.used.iter().map(|&i| out.ids[i].clone()).collect()))?;
    fs::write(dir.join("skipped.txt"), lines(out.skipped.iter().map(|&i| out.ids[i].clone()).collect()))?;
    fs::write(
        dir.join("verdicts.txt"),
        lines(
            out.attempts
                .iter()
                .map(|a| verdict_line(&out.ids[a.from], &out.ids[a.to], &a.verdict))
                .collect(),
        ),
    )?;
    let gaps = dir.join("gaps.txt");
    match &out.gap {
        Some(g) => fs::write(gaps, format!("{g}\n"))?,
        None if gaps.exists() => fs::remove_file(gaps)?,
        None => {}
    }
    if !out.centers.is_empty() {
        crate::georef::write_control_points(&dir.join("centers.txt"), &out.centers)?;
    }
    if let Some(r) = &out.georef {
        fs::write(dir.join("georef.txt"), r.to_string())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, render_sequence, Jitter, Texture, TrajectorySpec};

    #[test]
    fn orientation_round_trips() {
        let img = RgbImage::from_fn(7, 5, |x, y| image::Rgb([x as u8, y as u8, 0]));
        for axis in [StitchAxis::Horizontal, StitchAxis::Vertical] {
            for sign in [1, -1] {
                let o = Orientation(StitchDirection { axis, sign });
                let c = o.image_to_canonical(&img);
                // canonical pixel values follow the point map
                let t = o.to_canonical((7, 5));
                for (x, y) in [(0, 0), (6, 0), (3, 4)] {
                    let q = t.apply(&Point::new(x as f64, y as f64));
                    assert_eq!(c.get_pixel(q.x as u32, q.y as u32), img.get_pixel(x, y));
                }
                assert_eq!(o.canonical_to_output(&c), img);
                let back = o.from_canonical(c.dimensions());
                let q = back.apply(&t.apply(&Point::new(2.0, 3.0)));
                assert!((q - Point::new(2.0, 3.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lists_lexicographic_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["b.png", "a.png", "c.jpg", "notes.txt"] {
            fs::write(dir.path().join(n), b"x").unwrap();
        }
        let names: Vec<String> = list_images(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.png", "b.png", "c.jpg"]);
        fs::write(dir.path().join(MANIFEST_FILE), "c.jpg\na.png\n").unwrap();
        assert_eq!(list_images(dir.path()).unwrap().len(), 2);
        fs::write(dir.path().join(MANIFEST_FILE), "zzz.png\n").unwrap();
        assert!(list_images(dir.path()).is_err());
        fs::remove_file(dir.path().join(MANIFEST_FILE)).unwrap();
        fs::write(dir.path().join("d.tif"), b"x").unwrap();
        assert!(list_images(dir.path()).is_err());
    }

    fn small_run(axis: StitchAxis, sign: i32) -> (Vec<ImageRecord>, StitchOutput) {
        let traj = TrajectorySpec {
            seed: 2,
            n_frames: 12,
            step_px: 80.0,
            jitter: Jitter {
                lateral_sigma_px: 1.0,
                step_sigma_px: 3.0,
                roll_sigma_deg: 0.2,
                scale_sigma: 0.002,
            },
            frame_w: 320,
            frame_h: 240,
        };
        let scene = generate_scene(&traj.scene_for(9, Texture::BlobField)).unwrap();
        let seq = render_sequence(&scene, &traj).unwrap();
        let dir = StitchDirection { axis, sign };
        let o = Orientation(dir);
        // Present the canonical sequence in the requested orientation.
        let frames: Vec<ImageRecord> = seq
            .frames
            .iter()
            .map(|f| {
                let dims = o.canonical_dims(f.dims());
                let out = Orientation::remap(&f.pixels, (dims.0, dims.1), &o.to_canonical(dims));
                ImageRecord { pixels: out, ..f.clone() }
            })
            .collect();
        // Small frames carry fewer edge features than full-size ones.
        let mut cfg = PipelineConfig {
            min_prefilter_matches: 20,
            ..PipelineConfig::default()
        };
        cfg.motion.stitch_axis = axis;
        cfg.motion.stitch_sign = sign;
        let out = stitch_images(&frames, &cfg, &StitchOptions::default()).unwrap();
        (frames, out)
    }

    #[test]
    fn small_synthetic_row() {
        let (frames, out) = small_run(StitchAxis::Horizontal, 1);
        assert!(out.gap.is_none(), "{:?}", out.gap);
        assert_eq!(out.used.len() + out.skipped.len(), frames.len());
        assert!(*out.used.last().unwrap() + 5 >= frames.len() - 1);
        let (w, h) = out.mosaic.dimensions();
        assert!(w > 900 && h > 200 && h < 280, "{w}x{h}");
        let xs: Vec<f64> = out.centers.iter().map(|c| c.pixel.x).collect();
        assert!(xs.windows(2).all(|p| p[1] > p[0]));
        let r = out.georef.unwrap();
        assert!(r.r_squared > 0.999);
    }

    #[test]
    fn vertical_rows_come_back_vertical() {
        let (_, h) = small_run(StitchAxis::Horizontal, 1);
        let (_, v) = small_run(StitchAxis::Vertical, -1);
        assert_eq!(v.mosaic.dimensions(), (h.mosaic.height(), h.mosaic.width()));
        assert_eq!(v.used, h.used);
    }
}
