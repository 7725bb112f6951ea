//! Deterministic synthetic row scenes and camera sequences with exact ground truth.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::georef::ControlPoint;
use crate::imaging::{sample_rgb, to_rgb};
use crate::model::{transform_line, GeoRecord, ImageRecord, Point, Transform2D};

/// Ground sample distance of synthetic scenes.
pub const METERS_PER_PX: f64 = 0.002;
pub const BASE_LATITUDE: f64 = 38.0;
pub const BASE_LONGITUDE: f64 = -121.0;
pub const DEGREES_PER_PX: f64 = 1e-7;
/// Every n-th frame center becomes a ground-truth control point.
pub const CONTROL_POINT_STRIDE: usize = 20;

const SOIL: [f32; 3] = [112.0, 86.0, 62.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texture {
    BlobField,
    /// Square checkerboard; `period` is the full light+dark repeat in pixels.
    Checker { period: u32 },
    NoiseOctaves { octaves: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub row_length_px: u32,
    pub row_height_px: u32,
    pub texture: Texture,
    /// Blobs per 10^4 px².
    pub blob_density: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            row_length_px: 4096,
            row_height_px: 768,
            texture: Texture::BlobField,
            blob_density: 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jitter {
    pub lateral_sigma_px: f64,
    pub step_sigma_px: f64,
    pub roll_sigma_deg: f64,
    pub scale_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub seed: u64,
    pub n_frames: usize,
    pub step_px: f64,
    pub jitter: Jitter,
    pub frame_w: u32,
    pub frame_h: u32,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 200,
            step_px: 160.0,
            jitter: Jitter {
                lateral_sigma_px: 3.0,
                step_sigma_px: 10.0,
                roll_sigma_deg: 0.5,
                scale_sigma: 0.005,
            },
            frame_w: 640,
            frame_h: 480,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_frames == 0 {
            return bad("n_frames must be positive".into());
        }
        if !(self.step_px > 0.0) || self.step_px >= self.frame_w as f64 {
            return bad(format!("step_px {} must lie in (0, frame_w)", self.step_px));
        }
        if self.frame_w < 64 || self.frame_h < 64 {
            return bad("frames must be at least 64x64".into());
        }
        let j = &self.jitter;
        for (name, v) in [
            ("lateral_sigma_px", j.lateral_sigma_px),
            ("step_sigma_px", j.step_sigma_px),
            ("roll_sigma_deg", j.roll_sigma_deg),
            ("scale_sigma", j.scale_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number"));
            }
        }
        if j.scale_sigma >= 0.2 || j.roll_sigma_deg >= 10.0 {
            return bad("scale/roll jitter too large".into());
        }
        Ok(())
    }

    fn margin(&self) -> u32 {
        let j = &self.jitter;
        let diag = (self.frame_w as f64).hypot(self.frame_h as f64);
        let spin = diag * (4.0 * j.roll_sigma_deg.to_radians() + 4.0 * j.scale_sigma);
        (8.0 + 5.0 * j.lateral_sigma_px + spin).ceil() as u32
    }

    /// Scene just large enough to hold the trajectory with margin.
    pub fn scene_for(&self, seed: u64, texture: Texture) -> SceneSpec {
        let m = self.margin();
        let drift = self.step_px * (self.n_frames.saturating_sub(1)) as f64
            + 6.0 * self.jitter.step_sigma_px * (self.n_frames as f64).sqrt();
        let len = (drift.ceil() as u32 + self.frame_w + 2 * m).max(4 * self.frame_w);
        SceneSpec {
            seed,
            row_length_px: len,
            row_height_px: self.frame_h + 2 * m,
            texture,
            ..SceneSpec::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    cx: f32,
    cy: f32,
    a: f32,
    b: f32,
    cos: f32,
    sin: f32,
    color: [f32; 3],
    /// Stripe count across the major axis; 0 for plain blobs.
    veins: f32,
}

impl Blob {
    fn reach(&self) -> f32 {
        self.a.max(self.b) + 1.0
    }
}

fn draw_blobs(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Blob> {
    let area = spec.row_length_px as f64 * spec.row_height_px as f64;
    let n = (spec.blob_density.max(0.0) * area / 1e4).round() as usize;
    let mut blobs = Vec::with_capacity(4 * n);
    let place = |rng: &mut ChaCha8Rng| {
        (
            rng.random_range(0.0..spec.row_length_px as f32),
            rng.random_range(0.0..spec.row_height_px as f32),
        )
    };
    // soil grain under the foliage
    for _ in 0..3 * n {
        let a = rng.random_range(1.2f32..3.0);
        let b = a * rng.random_range(0.6f32..1.0);
        let th = rng.random_range(0.0f32..std::f32::consts::PI);
        let v = rng.random_range(-55.0f32..55.0);
        let (cx, cy) = place(rng);
        blobs.push(Blob {
            cx,
            cy,
            a,
            b,
            cos: th.cos(),
            sin: th.sin(),
            color: [SOIL[0] + v, SOIL[1] + 0.9 * v, SOIL[2] + 0.8 * v],
            veins: 0.0,
        });
    }
    for _ in 0..n {
        let a = 2.5 + 15.0 * rng.random::<f32>().powi(2);
        let b = a * rng.random_range(0.35f32..1.0);
        let th = rng.random_range(0.0f32..std::f32::consts::PI);
        let leaf = rng.random::<f32>() < 0.8;
        let color = if leaf {
            [
                rng.random_range(15.0..95.0),
                rng.random_range(80.0..215.0),
                rng.random_range(15.0..85.0),
            ]
        } else {
            let v = rng.random_range(40.0f32..190.0);
            [v, v * 0.8, v * 0.6]
        };
        let (cx, cy) = place(rng);
        blobs.push(Blob {
            cx,
            cy,
            a,
            b,
            cos: th.cos(),
            sin: th.sin(),
            color,
            veins: if leaf && a > 6.0 { rng.random_range(2.0f32..5.0) } else { 0.0 },
        });
    }
    blobs
}

fn paint_blob(row: &mut [f32], y: f32, blob: &Blob, width: u32) {
    let r = blob.reach();
    let x0 = (blob.cx - r).floor().max(0.0) as u32;
    let x1 = ((blob.cx + r).ceil() as u32).min(width - 1);
    let dy = y - blob.cy;
    for x in x0..=x1 {
        let dx = x as f32 - blob.cx;
        let u = (dx * blob.cos + dy * blob.sin) / blob.a;
        let v = (-dx * blob.sin + dy * blob.cos) / blob.b;
        let d = (u * u + v * v).sqrt();
        let cover = ((1.0 - d) * blob.b + 0.5).clamp(0.0, 1.0);
        if cover <= 0.0 {
            continue;
        }
        let mut shade = 0.65 + 0.35 * (1.0 - d * d).max(0.0);
        if blob.veins > 0.0 {
            shade *= 0.8 + 0.2 * (u * blob.veins * std::f32::consts::PI).cos().abs();
        }
        let px = &mut row[3 * x as usize..3 * x as usize + 3];
        for c in 0..3 {
            px[c] = px[c] * (1.0 - cover) + blob.color[c] * shade * cover;
        }
    }
}

fn lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> f32 {
    // splitmix64 over the lattice coordinates
    let mut z = seed
        .wrapping_add((octave as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((ix as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((iy as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 40) as f32 / (1u64 << 24) as f32
}

fn value_noise(seed: u64, octaves: u32, x: f32, y: f32) -> f32 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut period = 64.0f32;
    let mut amp = 1.0f32;
    for o in 0..octaves.max(1) {
        let fx = x / period;
        let fy = y / period;
        let (ix, iy) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - ix, fy - iy);
        let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
        let (ix, iy) = (ix as i64, iy as i64);
        let v00 = lattice(seed, o, ix, iy);
        let v10 = lattice(seed, o, ix + 1, iy);
        let v01 = lattice(seed, o, ix, iy + 1);
        let v11 = lattice(seed, o, ix + 1, iy + 1);
        let top = v00 + (v10 - v00) * sx;
        let bot = v01 + (v11 - v01) * sx;
        sum += amp * (top + (bot - top) * sy);
        norm += amp;
        period = (period / 2.0).max(2.0);
        amp *= 0.6;
    }
    sum / norm
}

/// Renders the scene texture.
pub fn generate_scene(spec: &SceneSpec) -> Result<RgbImage> {
    let (w, h) = (spec.row_length_px, spec.row_height_px);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("scene dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blobs = match spec.texture {
        Texture::BlobField => draw_blobs(spec, &mut rng),
        _ => Vec::new(),
    };
    const BAND: u32 = 32;
    let n_bands = h.div_ceil(BAND) as usize;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_bands];
    for (i, b) in blobs.iter().enumerate() {
        let r = b.reach();
        let lo = ((b.cy - r).floor().max(0.0) as u32 / BAND) as usize;
        let hi = (((b.cy + r).ceil().max(0.0) as u32).min(h - 1) / BAND) as usize;
        for bucket in buckets.iter_mut().take(hi + 1).skip(lo) {
            bucket.push(i);
        }
    }
    let mut img = RgbImage::new(w, h);
    let stride = 3 * w as usize;
    img.par_chunks_mut(stride * BAND as usize)
        .enumerate()
        .for_each(|(band, chunk)| {
            let mut row = vec![0.0f32; stride];
            for (k, out) in chunk.chunks_mut(stride).enumerate() {
                let y = band as u32 * BAND + k as u32;
                for x in 0..w {
                    let px = match spec.texture {
                        Texture::BlobField => SOIL,
                        Texture::Checker { period } => {
                            let cell = (period / 2).max(1);
                            if ((x / cell) + (y / cell)) % 2 == 0 {
                                [200.0, 200.0, 200.0]
                            } else {
                                [40.0, 40.0, 40.0]
                            }
                        }
                        Texture::NoiseOctaves { octaves } => {
                            let v = value_noise(spec.seed, octaves, x as f32, y as f32);
                            [40.0 + 180.0 * v, 60.0 + 150.0 * v, 30.0 + 120.0 * v]
                        }
                    };
                    row[3 * x as usize..3 * x as usize + 3].copy_from_slice(&px);
                }
                for &i in &buckets[band] {
                    let b = &blobs[i];
                    if (y as f32 - b.cy).abs() <= b.reach() {
                        paint_blob(&mut row, y as f32, b, w);
                    }
                }
                for (o, v) in out.iter_mut().zip(&row) {
                    *o = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        });
    Ok(img)
}

/// Drawn pose of one frame: scene position of the frame center plus roll and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePose {
    pub x: f64,
    pub y: f64,
    pub roll_deg: f64,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<ImageRecord>,
    pub poses: Vec<FramePose>,
    /// Frame-to-scene similarity per frame.
    pub frame_to_scene: Vec<Transform2D>,
    /// `links[k]` maps frame `k + 1` into frame `k`.
    pub links: Vec<Transform2D>,
    pub geo: Vec<GeoRecord>,
}

impl SyntheticSequence {
    /// Maps frame `k` into frame 0.
    pub fn to_first(&self, k: usize) -> Result<Transform2D> {
        Ok(self.frame_to_scene[0].inverse()?.compose(&self.frame_to_scene[k]))
    }

    /// Level row frame: the scene translated so that frame 0's center lands
    /// on its own pixel center. Unlike frame 0's axes it carries no roll.
    pub fn scene_to_row(&self, p: &Point) -> Point {
        let c = self.frames[0].center();
        let c0 = self.frame_to_scene[0].apply(&c);
        Point::new(p.x - c0.x + c.x, p.y - c0.y + c.y)
    }

    /// Frame-center landmarks of every `stride`-th frame in the level row
    /// frame, with their along-row position in metres.
    pub fn control_points(&self, stride: usize) -> Result<Vec<(String, Point, f64)>> {
        let mut out = Vec::new();
        for k in (0..self.frames.len()).step_by(stride.max(1)) {
            let p = self.scene_to_row(&self.frame_to_scene[k].apply(&self.frames[k].center()));
            out.push((self.frames[k].id.clone(), p, self.poses[k].x * METERS_PER_PX));
        }
        Ok(out)
    }
}

/// Landmarks at the frame centers of every `stride`-th frame, located twice:
/// in the level row frame (ground truth) and in a mosaic through `map`,
/// which maps a pixel of a candidate frame into the mosaic. Each landmark is
/// looked up in the candidate frame whose center is nearest to it.
pub fn locate_landmarks(
    seq: &SyntheticSequence,
    stride: usize,
    candidates: &[usize],
    map: impl Fn(usize, &Point) -> Option<Point>,
) -> Result<(Vec<ControlPoint>, Vec<ControlPoint>)> {
    let mut truth = Vec::new();
    let mut found = Vec::new();
    for k in (0..seq.frames.len()).step_by(stride.max(1)) {
        let scene_p = seq.frame_to_scene[k].apply(&seq.frames[k].center());
        let Some(&j) = candidates.iter().min_by(|&&a, &&b| {
            let da = (seq.poses[a].x - scene_p.x).abs();
            let db = (seq.poses[b].x - scene_p.x).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        }) else {
            continue;
        };
        let local = seq.frame_to_scene[j].inverse()?.apply(&scene_p);
        let Some(m) = map(j, &local) else { continue };
        let label = seq.frames[k].id.clone();
        truth.push(ControlPoint {
            label: label.clone(),
            pixel: seq.scene_to_row(&scene_p),
            world: Some(seq.geo[k]),
        });
        found.push(ControlPoint {
            label,
            pixel: m,
            world: Some(seq.geo[k]),
        });
    }
    Ok((truth, found))
}

pub fn frame_id(k: usize) -> String {
    format!("frame_{k:04}")
}

fn draw_poses(traj: &TrajectorySpec, start: (f64, f64)) -> Vec<FramePose> {
    let mut rng = ChaCha8Rng::seed_from_u64(traj.seed);
    let j = &traj.jitter;
    let normal = |s: f64| Normal::new(0.0, s.max(0.0)).expect("finite sigma");
    let (n_step, n_lat, n_roll, n_scale) = (
        normal(j.step_sigma_px),
        normal(j.lateral_sigma_px),
        normal(j.roll_sigma_deg),
        normal(j.scale_sigma),
    );
    let mut x = start.0;
    (0..traj.n_frames)
        .map(|k| {
            if k > 0 {
                x += (traj.step_px + n_step.sample(&mut rng)).max(1.0);
            }
            FramePose {
                x,
                y: start.1 + n_lat.sample(&mut rng),
                roll_deg: n_roll.sample(&mut rng),
                scale: 1.0 + n_scale.sample(&mut rng),
            }
        })
        .collect()
}

/// Samples every frame of the trajectory from `scene`.
pub fn render_sequence(scene: &RgbImage, traj: &TrajectorySpec) -> Result<SyntheticSequence> {
    traj.validate()?;
    let (fw, fh) = (traj.frame_w, traj.frame_h);
    let c = Point::new((fw - 1) as f64 / 2.0, (fh - 1) as f64 / 2.0);
    let margin = traj.margin() as f64;
    let start = (margin + c.x, scene.height() as f64 / 2.0 - 0.5);
    let poses = draw_poses(traj, start);
    let frame_to_scene: Vec<Transform2D> = poses
        .iter()
        .map(|p| {
            let rot = Transform2D::similarity(p.scale, p.roll_deg.to_radians(), 0.0, 0.0);
            let off = rot.apply(&c);
            Transform2D::similarity(p.scale, p.roll_deg.to_radians(), p.x - off.x, p.y - off.y)
        })
        .collect();
    let (sw, sh) = (scene.width() as f64, scene.height() as f64);
    for (k, t) in frame_to_scene.iter().enumerate() {
        for q in [(0.0, 0.0), ((fw - 1) as f64, 0.0), (0.0, (fh - 1) as f64), ((fw - 1) as f64, (fh - 1) as f64)] {
            let s = t.apply(&Point::new(q.0, q.1));
            if s.x < 0.0 || s.y < 0.0 || s.x > sw - 1.0 || s.y > sh - 1.0 {
                return Err(Error::InvalidParameter(format!("frame {k} leaves the scene bounds")));
            }
        }
    }
    let frames: Vec<RgbImage> = frame_to_scene
        .par_iter()
        .map(|t| {
            RgbImage::from_fn(fw, fh, |x, y| {
                let s = t.apply(&Point::new(x as f64, y as f64));
                sample_rgb(scene, s.x, s.y).map(to_rgb).unwrap_or(Rgb([0, 0, 0]))
            })
        })
        .collect();
    let mut links = Vec::new();
    for k in 1..frame_to_scene.len() {
        links.push(frame_to_scene[k - 1].inverse()?.compose(&frame_to_scene[k]));
    }
    let geo = poses
        .iter()
        .map(|p| GeoRecord::new(BASE_LATITUDE + p.x * DEGREES_PER_PX, BASE_LONGITUDE))
        .collect::<Result<Vec<_>>>()?;
    let frames = frames
        .into_iter()
        .zip(&geo)
        .enumerate()
        .map(|(k, (img, g))| Ok(ImageRecord::new(frame_id(k), k, img)?.with_geo(*g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticSequence {
        frames,
        poses,
        frame_to_scene,
        links,
        geo,
    })
}

/// Writes frames (`frame_NNNN.png`), `geo.txt`, `ground_truth.txt` (each frame
/// mapped into frame 0) and `control_points.txt` (every frame center in the
/// level row frame).
pub fn write_dataset(dir: &Path, seq: &SyntheticSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    seq.frames.par_iter().try_for_each(|f| -> Result<()> {
        f.pixels.save(dir.join(format!("{}.png", f.id)))?;
        Ok(())
    })?;
    let mut geo = String::new();
    let mut gt = String::new();
    for (k, f) in seq.frames.iter().enumerate() {
        let g = &seq.geo[k];
        geo.push_str(&format!("{} {:.9} {:.9}\n", f.id, g.latitude, g.longitude));
        gt.push_str(&transform_line(&f.id, &seq.to_first(k)?));
        gt.push('\n');
    }
    fs::write(dir.join("geo.txt"), geo)?;
    fs::write(dir.join("ground_truth.txt"), gt)?;
    let mut cp = fs::File::create(dir.join("control_points.txt"))?;
    for (label, p, _) in seq.control_points(1)? {
        let k: usize = label.trim_start_matches("frame_").parse().unwrap_or(0);
        let g = &seq.geo[k];
        writeln!(cp, "{label} {:.3} {:.3} {:.9} {:.9}", p.x, p.y, g.latitude, g.longitude)?;
    }
    Ok(())
}
