//! Corner detection, oriented binary descriptors and Hamming matching.
//!
//! Detection runs a segment test on a radius-3 circle of the box-smoothed luma
//! image, ranks survivors by a Harris response, and keeps the strongest few per
//! grid cell. Each keypoint gets an intensity-centroid orientation and a
//! 256-bit descriptor built from a fixed comparison pattern rotated by that
//! orientation.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{Gray, Integral};
use crate::model::{ImageRecord, Point, StitchDirection};

/// Radius of the disk holding the descriptor comparison pattern.
pub const PATCH_RADIUS: i32 = 15;
/// Half-width of the box averaged around each pattern sample.
const SAMPLE_HALF: i32 = 2;
/// Keypoints closer than this to the border are not described.
pub const BORDER: usize = (PATCH_RADIUS + SAMPLE_HALF + 1) as usize;

const PATTERN_SEED: u64 = 0x5eed_0f_b1_7e5;

pub const DEFAULT_GRID: usize = 8;
pub const DEFAULT_MAX_PER_CELL: usize = 40;
pub const DEFAULT_MAX_HAMMING: u32 = 64;
pub const DEFAULT_RATIO: f64 = 0.85;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    /// Radians.
    pub angle: f64,
}

impl Keypoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// 256-bit binary descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    fn set_bit(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Keeps only keypoints satisfying `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Keypoint) -> bool) -> FeatureSet {
        let mut out = FeatureSet {
            image_id: self.image_id.clone(),
            width: self.width,
            height: self.height,
            keypoints: Vec::new(),
            descriptors: Vec::new(),
        };
        for (k, d) in self.keypoints.iter().zip(&self.descriptors) {
            if keep(k) {
                out.keypoints.push(*k);
                out.descriptors.push(*d);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub index_a: usize,
    pub index_b: usize,
    pub score: f64,
}

/// One-to-one correspondences between two images, with resolved coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
    pub points_a: Vec<Point>,
    pub points_b: Vec<Point>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, pair: MatchPair, a: Point, b: Point) {
        self.pairs.push(pair);
        self.points_a.push(a);
        self.points_b.push(b);
    }

    /// Matches built from coordinates alone; indices are positions.
    pub fn from_points(points_a: Vec<Point>, points_b: Vec<Point>) -> Self {
        assert_eq!(points_a.len(), points_b.len());
        let pairs = (0..points_a.len())
            .map(|i| MatchPair {
                index_a: i,
                index_b: i,
                score: 1.0,
            })
            .collect();
        Self {
            pairs,
            points_a,
            points_b,
        }
    }

    pub fn select(&self, indices: impl IntoIterator<Item = usize>) -> MatchSet {
        let mut out = MatchSet::default();
        for i in indices {
            out.push(self.pairs[i], self.points_a[i], self.points_b[i]);
        }
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> MatchSet {
        self.select((0..self.len()).filter(|&i| keep(i)).collect::<Vec<_>>())
    }

    /// Same correspondences with the roles of the two images exchanged.
    pub fn swapped(&self) -> MatchSet {
        MatchSet {
            pairs: self
                .pairs
                .iter()
                .map(|p| MatchPair {
                    index_a: p.index_b,
                    index_b: p.index_a,
                    score: p.score,
                })
                .collect(),
            points_a: self.points_b.clone(),
            points_b: self.points_a.clone(),
        }
    }

    /// True when no keypoint index appears twice on either side.
    pub fn is_one_to_one(&self) -> bool {
        let mut seen_a = std::collections::HashSet::new();
        let mut seen_b = std::collections::HashSet::new();
        self.pairs
            .iter()
            .all(|p| seen_a.insert(p.index_a) && seen_b.insert(p.index_b))
    }
}

/// Tunables beyond the grid layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub grid: usize,
    pub max_per_cell: usize,
    /// Intensity difference for the segment test.
    pub threshold: f32,
    pub harris_k: f64,
    pub min_response: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            max_per_cell: DEFAULT_MAX_PER_CELL,
            threshold: 12.0,
            harris_k: 0.04,
            min_response: 2.0e5,
        }
    }
}

/// The 256 comparison pairs, fixed for all builds.
fn pattern() -> &'static [((i32, i32), (i32, i32)); 256] {
    static PATTERN: OnceLock<[((i32, i32), (i32, i32)); 256]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let normal = Normal::new(0.0f64, (2 * PATCH_RADIUS + 1) as f64 / 5.0).unwrap();
        let r2 = (PATCH_RADIUS * PATCH_RADIUS) as f64;
        let draw = |rng: &mut ChaCha8Rng| loop {
            let x = normal.sample(rng).round();
            let y = normal.sample(rng).round();
            if x * x + y * y <= r2 {
                return (x as i32, y as i32);
            }
        };
        let mut out = [((0, 0), (0, 0)); 256];
        for slot in out.iter_mut() {
            loop {
                let p = draw(&mut rng);
                let q = draw(&mut rng);
                if p != q {
                    *slot = (p, q);
                    break;
                }
            }
        }
        out
    })
}

fn segment_test(g: &Gray, x: usize, y: usize, t: f32) -> bool {
    let c = g.get(x, y);
    let mut states = [0i8; 16];
    for (i, (dx, dy)) in CIRCLE.iter().enumerate() {
        let v = g.get((x as i32 + dx) as usize, (y as i32 + dy) as usize);
        states[i] = if v > c + t {
            1
        } else if v < c - t {
            -1
        } else {
            0
        };
    }
    // Quick rejection on the four compass points.
    let compass = [states[0], states[4], states[8], states[12]];
    if compass.iter().filter(|&&s| s != 0).count() < 2 {
        return false;
    }
    // Longest circular run of a single sign.
    let mut longest = 0;
    for sign in [1i8, -1] {
        let mut run = 0;
        for i in 0..32 {
            if states[i % 16] == sign {
                run += 1;
                longest = longest.max(run.min(16));
            } else {
                run = 0;
            }
        }
    }
    if longest >= 9 {
        return true;
    }
    // Saddle junction (e.g. checkerboard corners): at least two bright and two
    // dark arcs alternating around the circle.
    let mut arcs = Vec::new();
    let start = (0..16).find(|&i| states[i] != states[(i + 15) % 16]);
    if let Some(start) = start {
        let mut i = start;
        let mut len = 0;
        let mut cur = states[start];
        for _ in 0..16 {
            if states[i] == cur {
                len += 1;
            } else {
                arcs.push((cur, len));
                cur = states[i];
                len = 1;
            }
            i = (i + 1) % 16;
        }
        arcs.push((cur, len));
    }
    let bright = arcs.iter().filter(|(s, l)| *s == 1 && *l >= 2).count();
    let dark = arcs.iter().filter(|(s, l)| *s == -1 && *l >= 2).count();
    bright >= 2 && dark >= 2
}

fn harris(g: &Gray, x: usize, y: usize, k: f64) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0f64, 0.0f64, 0.0f64);
    for yy in y - 2..=y + 2 {
        for xx in x - 2..=x + 2 {
            let ix = 0.5 * (g.get(xx + 1, yy) - g.get(xx - 1, yy)) as f64;
            let iy = 0.5 * (g.get(xx, yy + 1) - g.get(xx, yy - 1)) as f64;
            sxx += ix * ix;
            syy += iy * iy;
            sxy += ix * iy;
        }
    }
    sxx * syy - sxy * sxy - k * (sxx + syy).powi(2)
}

fn orientation(g: &Gray, x: usize, y: usize) -> f64 {
    let (mut m10, mut m01) = (0.0f64, 0.0f64);
    let r = PATCH_RADIUS;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let v = g.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

fn describe(ii: &Integral, x: usize, y: usize, angle: f64) -> Descriptor {
    let (sn, cs) = angle.sin_cos();
    let box_mean = |px: i32, py: i32| -> f64 {
        let rx = (cs * px as f64 - sn * py as f64).round() as i32 + x as i32;
        let ry = (sn * px as f64 + cs * py as f64).round() as i32 + y as i32;
        ii.sum(
            (rx - SAMPLE_HALF) as usize,
            (ry - SAMPLE_HALF) as usize,
            (rx + SAMPLE_HALF) as usize,
            (ry + SAMPLE_HALF) as usize,
        )
    };
    let mut d = Descriptor::default();
    for (i, (p, q)) in pattern().iter().enumerate() {
        if box_mean(p.0, p.1) < box_mean(q.0, q.1) {
            d.set_bit(i);
        }
    }
    d
}

/// Detects and describes keypoints on a luma raster.
pub fn detect_on_gray(image_id: &str, luma: &Gray, params: &DetectorParams) -> Result<FeatureSet> {
    let (w, h) = (luma.width, luma.height);
    if (w.min(h) as f64) / 2.0 <= BORDER as f64 {
        return Err(Error::InvalidImage {
            id: image_id.to_string(),
            reason: format!("{w}x{h} is too small for a {BORDER}px descriptor patch"),
        });
    }
    let g = luma.box3();
    let mut empty = FeatureSet {
        image_id: image_id.to_string(),
        width: w as u32,
        height: h as u32,
        keypoints: Vec::new(),
        descriptors: Vec::new(),
    };
    let grid = params.grid.max(1);

    // Candidate responses, row-parallel.
    let rows: Vec<Vec<(usize, usize, f64)>> = (BORDER..h - BORDER)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            for x in BORDER..w - BORDER {
                if segment_test(&g, x, y, params.threshold) {
                    let r = harris(&g, x, y, params.harris_k);
                    if r > params.min_response {
                        row.push((x, y, r));
                    }
                }
            }
            row
        })
        .collect();
    let mut response = vec![0.0f64; w * h];
    for &(x, y, r) in rows.iter().flatten() {
        response[y * w + x] = r;
    }
    // 5×5 non-maximum suppression; ties go to the earlier raster position.
    let mut cells: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); grid * grid];
    for &(x, y, r) in rows.iter().flatten() {
        let mut is_max = true;
        'nms: for yy in y - 2..=y + 2 {
            for xx in x - 2..=x + 2 {
                if (xx, yy) == (x, y) {
                    continue;
                }
                let o = response[yy * w + xx];
                if o > r || (o == r && (yy, xx) < (y, x)) {
                    is_max = false;
                    break 'nms;
                }
            }
        }
        if is_max {
            let cx = x * grid / w;
            let cy = y * grid / h;
            cells[cy * grid + cx].push((r, y, x));
        }
    }
    let mut picked: Vec<(usize, usize, f64)> = Vec::new();
    for cell in cells.iter_mut() {
        cell.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        picked.extend(cell.iter().take(params.max_per_cell).map(|&(r, y, x)| (x, y, r)));
    }
    picked.sort_by_key(|&(x, y, _)| (y, x));

    let ii = Integral::new(&g);
    let described: Vec<(Keypoint, Descriptor)> = picked
        .par_iter()
        .map(|&(x, y, r)| {
            let angle = orientation(&g, x, y);
            (
                Keypoint {
                    x: x as f64,
                    y: y as f64,
                    response: r,
                    angle,
                },
                describe(&ii, x, y, angle),
            )
        })
        .collect();
    for (k, d) in described {
        empty.keypoints.push(k);
        empty.descriptors.push(d);
    }
    Ok(empty)
}

/// Detects up to `max_per_cell` keypoints in each of `grid × grid` cells.
pub fn detect_features(image: &ImageRecord, max_per_cell: usize, grid: usize) -> Result<FeatureSet> {
    let params = DetectorParams {
        grid,
        max_per_cell,
        ..DetectorParams::default()
    };
    detect_on_gray(&image.id, &Gray::luma(&image.pixels), &params)
}

/// Keeps keypoints within `fraction` of the image extent from the forward
/// edge (`forward = true`) or the trailing edge.
pub fn restrict_to_edge(set: &FeatureSet, dir: StitchDirection, fraction: f64, forward: bool) -> FeatureSet {
    let dims = (set.width, set.height);
    let extent = dir.extent(dims);
    set.retain(|k| in_edge_band(&k.point(), extent, dir, fraction, forward))
}

/// Whether `p` lies in the band of width `fraction × extent` at the forward
/// (toward travel) or trailing edge of an image.
pub fn in_edge_band(p: &Point, extent: f64, dir: StitchDirection, fraction: f64, forward: bool) -> bool {
    let c = dir.coord(p);
    let band = fraction * extent;
    // Forward edge is the high-coordinate side when the sign is positive.
    let high_side = forward == (dir.sign > 0);
    if high_side {
        c >= extent - band
    } else {
        c <= band
    }
}

fn best_two(d: &Descriptor, others: &[Descriptor]) -> (usize, u32, u32) {
    let mut best = (usize::MAX, u32::MAX, u32::MAX);
    for (j, o) in others.iter().enumerate() {
        let dist = d.hamming(o);
        if dist < best.1 {
            best = (j, dist, best.1);
        } else if dist < best.2 {
            best.2 = dist;
        }
    }
    best
}

fn passes_ratio(d1: u32, d2: u32, ratio: f64) -> bool {
    if d2 == u32::MAX {
        return true;
    }
    if d2 == 0 {
        return false;
    }
    d1 as f64 / d2 as f64 <= ratio
}

/// Mutual nearest-neighbour matching under Hamming distance with a two-sided
/// ratio test. Symmetric: swapping `a` and `b` swaps the pair orientation only.
pub fn match_features(a: &FeatureSet, b: &FeatureSet, max_hamming: u32, ratio: f64) -> MatchSet {
    let mut out = MatchSet::default();
    if a.is_empty() || b.is_empty() {
        return out;
    }
    let forward: Vec<(usize, u32, u32)> = a
        .descriptors
        .par_iter()
        .map(|d| best_two(d, &b.descriptors))
        .collect();
    let backward: Vec<(usize, u32, u32)> = b
        .descriptors
        .par_iter()
        .map(|d| best_two(d, &a.descriptors))
        .collect();
    for (i, &(j, d1, d2)) in forward.iter().enumerate() {
        let (back_i, e1, e2) = backward[j];
        if back_i != i || d1 > max_hamming {
            continue;
        }
        debug_assert_eq!(d1, e1);
        if !passes_ratio(d1, d2, ratio) || !passes_ratio(e1, e2, ratio) {
            continue;
        }
        out.push(
            MatchPair {
                index_a: i,
                index_b: j,
                score: 1.0 - d1 as f64 / 256.0,
            },
            a.keypoints[i].point(),
            b.keypoints[j].point(),
        );
    }
    out
}

/// Image size and id pair declared by a match file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchFileHeader {
    pub a_id: String,
    pub b_id: String,
    pub dims_a: (u32, u32),
    pub dims_b: (u32, u32),
}

fn parse_header(line: &str, path: &Path) -> Result<MatchFileHeader> {
    let err = |reason: String| Error::MatchFile {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for tok in line.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("header token `{tok}` is not key=value")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| err(format!("header is missing `{k}`")))
    };
    let dim = |k: &str| -> Result<u32> {
        get(k)?
            .parse::<u32>()
            .map_err(|_| err(format!("header `{k}` is not an integer")))
    };
    Ok(MatchFileHeader {
        a_id: get("a")?.to_string(),
        b_id: get("b")?.to_string(),
        dims_a: (dim("wa")?, dim("ha")?),
        dims_b: (dim("wb")?, dim("hb")?),
    })
}

/// Reads precomputed matches for the ordered pair `(a_id, b_id)`.
///
/// Keypoint indices are assigned per distinct coordinate in file order, so a
/// point repeated on either side violates one-to-one matching.
pub fn load_external_matches(path: impl AsRef<Path>, a_id: &str, b_id: &str) -> Result<MatchSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines.next().transpose()?.ok_or_else(|| Error::MatchFile {
        path: path.to_path_buf(),
        line: 1,
        reason: "empty file".into(),
    })?;
    let header = parse_header(&header_line, path)?;
    if header.a_id != a_id || header.b_id != b_id {
        return Err(Error::MatchFile {
            path: path.to_path_buf(),
            line: 1,
            reason: format!(
                "header pair ({}, {}) does not match requested ({a_id}, {b_id})",
                header.a_id, header.b_id
            ),
        });
    }
    let in_bounds = |x: f64, y: f64, (w, h): (u32, u32)| x >= 0.0 && y >= 0.0 && x <= w as f64 && y <= h as f64;
    let mut out = MatchSet::default();
    let mut index_a: HashMap<(u64, u64), usize> = HashMap::new();
    let mut index_b: HashMap<(u64, u64), usize> = HashMap::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::MatchFile {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(format!("malformed record `{line}`")))?;
        if vals.len() != 5 || vals.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("expected `xa ya xb yb score`, got `{line}`")));
        }
        let (xa, ya, xb, yb, score) = (vals[0], vals[1], vals[2], vals[3], vals[4]);
        if !in_bounds(xa, ya, header.dims_a) {
            return Err(err(format!("point ({xa}, {ya}) outside image a")));
        }
        if !in_bounds(xb, yb, header.dims_b) {
            return Err(err(format!("point ({xb}, {yb}) outside image b")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(err(format!("score {score} outside [0, 1]")));
        }
        let ka = (xa.to_bits(), ya.to_bits());
        let kb = (xb.to_bits(), yb.to_bits());
        if index_a.contains_key(&ka) {
            return Err(err(format!("point ({xa}, {ya}) in image a matched twice")));
        }
        if index_b.contains_key(&kb) {
            return Err(err(format!("point ({xb}, {yb}) in image b matched twice")));
        }
        let ia = index_a.len();
        let ib = index_b.len();
        index_a.insert(ka, ia);
        index_b.insert(kb, ib);
        out.push(
            MatchPair {
                index_a: ia,
                index_b: ib,
                score,
            },
            Point::new(xa, ya),
            Point::new(xb, yb),
        );
    }
    Ok(out)
}

/// Writes a match file readable by [`load_external_matches`].
pub fn write_match_file(path: impl AsRef<Path>, header: &MatchFileHeader, matches: &MatchSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "a={} b={} wa={} ha={} wb={} hb={}",
        header.a_id, header.b_id, header.dims_a.0, header.dims_a.1, header.dims_b.0, header.dims_b.1
    )?;
    for i in 0..matches.len() {
        let (a, b) = (matches.points_a[i], matches.points_b[i]);
        writeln!(f, "{} {} {} {} {}", a.x, a.y, b.x, b.y, matches.pairs[i].score)?;
    }
    f.flush()?;
    Ok(())
}

/// Pixel range `[start, end)` along the stitch axis covered by an edge band.
pub fn band_range(extent: u32, dir: StitchDirection, fraction: f64, forward: bool) -> (u32, u32) {
    let band = (fraction * extent as f64).ceil() as u32;
    let band = band.min(extent);
    let high_side = forward == (dir.sign > 0);
    if high_side {
        (extent - band, extent)
    } else {
        (0, band)
    }
}
