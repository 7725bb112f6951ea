//! Shared domain types and the pipeline configuration schema.
//!
//! Pixel convention: origin at the top-left pixel center, `x` to the right,
//! `y` downward. With `stitch_axis = horizontal` and `stitch_sign = 1` the
//! scene advances toward `+x` across the sequence.

use std::fmt;
use std::path::Path;

use image::RgbImage;
use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::geometry::MotionSummary;

pub type Point = nalgebra::Point2<f64>;

/// Smallest accepted image side, in pixels.
pub const MIN_IMAGE_SIDE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRecord {
    pub latitude: f64,
    pub longitude: f64,
    /// Precomputed along-row coordinate; overrides the lat/lon projection.
    pub along_row_m: Option<f64>,
}

impl GeoRecord {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidParameter(format!(
                "latitude/longitude out of range: {latitude}, {longitude}"
            )));
        }
        Ok(Self {
            latitude,
            longitude,
            along_row_m: None,
        })
    }
}

/// One captured frame.
#[derive(Debug, Clone)]
pub struct ImageRecord {
    pub id: String,
    pub seq_index: usize,
    pub pixels: RgbImage,
    pub geo: Option<GeoRecord>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, seq_index: usize, pixels: RgbImage) -> Result<Self> {
        let id = id.into();
        if pixels.width() < MIN_IMAGE_SIDE || pixels.height() < MIN_IMAGE_SIDE {
            return Err(Error::InvalidImage {
                id,
                reason: format!(
                    "{}x{} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}",
                    pixels.width(),
                    pixels.height()
                ),
            });
        }
        Ok(Self {
            id,
            seq_index,
            pixels,
            geo: None,
        })
    }

    pub fn with_geo(mut self, geo: GeoRecord) -> Self {
        self.geo = Some(geo);
        self
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.pixels.dimensions()
    }

    pub fn center(&self) -> Point {
        Point::new(self.width() as f64 / 2.0, self.height() as f64 / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StitchAxis {
    Horizontal,
    Vertical,
}

/// Axis plus the direction in which the scene advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StitchDirection {
    pub axis: StitchAxis,
    pub sign: i32,
}

impl StitchDirection {
    pub const FORWARD_X: Self = Self {
        axis: StitchAxis::Horizontal,
        sign: 1,
    };

    /// Signed component of `v` along the direction of travel.
    pub fn along(&self, v: Vector2<f64>) -> f64 {
        let raw = match self.axis {
            StitchAxis::Horizontal => v.x,
            StitchAxis::Vertical => v.y,
        };
        raw * self.sign as f64
    }

    /// Component of `v` perpendicular to the stitch axis (not sign-adjusted).
    pub fn ortho(&self, v: Vector2<f64>) -> f64 {
        match self.axis {
            StitchAxis::Horizontal => v.y,
            StitchAxis::Vertical => v.x,
        }
    }

    /// Image extent along the stitch axis.
    pub fn extent(&self, dims: (u32, u32)) -> f64 {
        match self.axis {
            StitchAxis::Horizontal => dims.0 as f64,
            StitchAxis::Vertical => dims.1 as f64,
        }
    }

    /// Coordinate of `p` along the stitch axis (raw, not sign-adjusted).
    pub fn coord(&self, p: &Point) -> f64 {
        match self.axis {
            StitchAxis::Horizontal => p.x,
            StitchAxis::Vertical => p.y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConstraints {
    pub stitch_axis: StitchAxis,
    pub stitch_sign: i32,
    /// Minimum forward advance. `None` means 5% of the image extent along the axis.
    pub min_advance_px: Option<f64>,
    pub max_ortho_ratio: f64,
    pub scale_bounds: [f64; 2],
    pub max_rotation_deg: f64,
}

impl Default for MotionConstraints {
    fn default() -> Self {
        Self {
            stitch_axis: StitchAxis::Horizontal,
            stitch_sign: 1,
            min_advance_px: None,
            max_ortho_ratio: 0.5,
            scale_bounds: [0.8, 1.25],
            max_rotation_deg: 15.0,
        }
    }
}

impl MotionConstraints {
    pub fn direction(&self) -> StitchDirection {
        StitchDirection {
            axis: self.stitch_axis,
            sign: self.stitch_sign,
        }
    }

    pub fn min_advance_for(&self, dims: (u32, u32)) -> f64 {
        self.min_advance_px
            .unwrap_or_else(|| 0.05 * self.direction().extent(dims))
    }

    /// Returns true when the motion satisfies every constraint.
    pub fn admits(&self, motion: &MotionSummary, dims: (u32, u32)) -> bool {
        let min_advance = self.min_advance_for(dims);
        motion.t_along >= min_advance
            && motion.t_ortho.abs() <= self.max_ortho_ratio * motion.t_along
            && motion.scale >= self.scale_bounds[0]
            && motion.scale <= self.scale_bounds[1]
            && motion.rotation_deg.abs() <= self.max_rotation_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpMode {
    Perspective,
    PartialAffine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window: usize,
    pub batch_size: usize,
    pub edge_fraction: f64,
    pub min_prefilter_matches: usize,
    pub ransac_threshold_px: f64,
    pub ransac_iterations: usize,
    pub ransac_seed: u64,
    pub min_inliers: usize,
    pub prune_fraction: f64,
    pub max_rms_px: f64,
    pub warp_mode: WarpMode,
    pub blend_levels: usize,
    pub straighten_tolerance_px: f64,
    pub motion: MotionConstraints,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 5,
            batch_size: 10,
            edge_fraction: 0.25,
            min_prefilter_matches: 50,
            ransac_threshold_px: 3.0,
            ransac_iterations: 2000,
            ransac_seed: 0,
            min_inliers: 15,
            prune_fraction: 0.2,
            max_rms_px: 3.0,
            warp_mode: WarpMode::PartialAffine,
            blend_levels: 5,
            straighten_tolerance_px: 5.0,
            motion: MotionConstraints::default(),
        }
    }
}

fn bad(field: &'static str, value: impl fmt::Display, reason: &'static str) -> Error {
    Error::Config {
        field,
        value: value.to_string(),
        reason,
    }
}

impl PipelineConfig {
    /// Checks every invariant, reporting the first violation.
    pub fn validate(self) -> Result<Self> {
        if self.window < 1 {
            return Err(bad("window", self.window, "must be >= 1"));
        }
        if self.batch_size < 3 {
            return Err(bad("batch_size", self.batch_size, "must be >= 3"));
        }
        if !(self.edge_fraction > 0.0 && self.edge_fraction <= 0.5) {
            return Err(bad("edge_fraction", self.edge_fraction, "must be in (0, 0.5]"));
        }
        if self.min_prefilter_matches < 4 {
            return Err(bad(
                "min_prefilter_matches",
                self.min_prefilter_matches,
                "must be >= 4",
            ));
        }
        if !(self.ransac_threshold_px > 0.0) {
            return Err(bad(
                "ransac_threshold_px",
                self.ransac_threshold_px,
                "must be > 0",
            ));
        }
        if self.ransac_iterations < 1 {
            return Err(bad(
                "ransac_iterations",
                self.ransac_iterations,
                "must be >= 1",
            ));
        }
        if self.min_inliers < 4 {
            return Err(bad("min_inliers", self.min_inliers, "must be >= 4"));
        }
        if !(0.0..=0.5).contains(&self.prune_fraction) {
            return Err(bad("prune_fraction", self.prune_fraction, "must be in [0, 0.5]"));
        }
        if !(self.max_rms_px > 0.0) {
            return Err(bad("max_rms_px", self.max_rms_px, "must be > 0"));
        }
        if self.blend_levels < 1 {
            return Err(bad("blend_levels", self.blend_levels, "must be >= 1"));
        }
        if !(self.straighten_tolerance_px > 0.0) {
            return Err(bad(
                "straighten_tolerance_px",
                self.straighten_tolerance_px,
                "must be > 0",
            ));
        }
        let m = &self.motion;
        if m.stitch_sign != 1 && m.stitch_sign != -1 {
            return Err(bad("motion.stitch_sign", m.stitch_sign, "must be 1 or -1"));
        }
        if let Some(adv) = m.min_advance_px {
            if !(adv > 0.0) {
                return Err(bad("motion.min_advance_px", adv, "must be > 0"));
            }
        }
        if !(m.max_ortho_ratio > 0.0) {
            return Err(bad("motion.max_ortho_ratio", m.max_ortho_ratio, "must be > 0"));
        }
        let [lo, hi] = m.scale_bounds;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return Err(bad(
                "motion.scale_bounds",
                format!("[{lo}, {hi}]"),
                "must satisfy 0 < min <= 1 <= max",
            ));
        }
        if !(m.max_rotation_deg > 0.0 && m.max_rotation_deg < 90.0) {
            return Err(bad(
                "motion.max_rotation_deg",
                m.max_rotation_deg,
                "must be in (0, 90)",
            ));
        }
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        raw.validate()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn ransac_kind(&self) -> TransformKind {
        match self.warp_mode {
            WarpMode::Perspective => TransformKind::Homography,
            WarpMode::PartialAffine => TransformKind::PartialAffine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformKind {
    Translation,
    PartialAffine,
    Homography,
}

impl TransformKind {
    /// Number of point pairs in a minimal sample.
    pub fn min_samples(self) -> usize {
        match self {
            TransformKind::Translation => 1,
            TransformKind::PartialAffine => 2,
            TransformKind::Homography => 4,
        }
    }
}

/// Planar projective transform acting on column vectors `(x, y, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2D {
    m: Matrix3<f64>,
    kind: TransformKind,
}

impl Transform2D {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
            kind: TransformKind::Translation,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
            kind: TransformKind::Translation,
        }
    }

    /// `p -> s R(theta) p + t`, with `theta` in radians.
    pub fn similarity(scale: f64, theta: f64, tx: f64, ty: f64) -> Self {
        let (sn, cs) = theta.sin_cos();
        let a = scale * cs;
        let b = scale * sn;
        Self {
            m: Matrix3::new(a, -b, tx, b, a, ty, 0.0, 0.0, 1.0),
            kind: TransformKind::PartialAffine,
        }
    }

    /// Full projective transform, normalized so `m[2][2] = 1` when nonzero.
    pub fn homography(m: Matrix3<f64>) -> Self {
        let mut m = m;
        let s = m[(2, 2)];
        if s.abs() > 1e-300 {
            m /= s;
        }
        Self {
            m,
            kind: TransformKind::Homography,
        }
    }

    /// Picks the narrowest kind whose shape the matrix satisfies to 1e-9.
    pub fn classify(m: Matrix3<f64>) -> Self {
        for kind in [TransformKind::Translation, TransformKind::PartialAffine] {
            let t = Self { m, kind };
            if t.has_consistent_shape(1e-9) {
                return t;
            }
        }
        Self::homography(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn apply(&self, p: &Point) -> Point {
        let m = &self.m;
        let x = m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)];
        let y = m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)];
        match self.kind {
            TransformKind::Homography => {
                let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
                Point::new(x / w, y / w)
            }
            _ => Point::new(x, y),
        }
    }

    pub fn is_invertible(&self) -> bool {
        let det = match self.kind {
            TransformKind::Homography => self.m.determinant(),
            _ => self.linear().determinant(),
        };
        det.is_finite() && det.abs() > 1e-12
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_invertible() {
            return Err(Error::NotInvertible);
        }
        let inv = match self.kind {
            TransformKind::Homography => {
                return Ok(Self::homography(
                    self.m.try_inverse().ok_or(Error::NotInvertible)?,
                ))
            }
            TransformKind::Translation => {
                Self::translation(-self.m[(0, 2)], -self.m[(1, 2)]).m
            }
            TransformKind::PartialAffine => {
                // (sR)^-1 = R^T / s, kept in the exact s'R' form.
                let a = self.m[(0, 0)];
                let b = self.m[(1, 0)];
                let n = a * a + b * b;
                let (ia, ib) = (a / n, -b / n);
                let (tx, ty) = (self.m[(0, 2)], self.m[(1, 2)]);
                Matrix3::new(
                    ia,
                    -ib,
                    -(ia * tx - ib * ty),
                    ib,
                    ia,
                    -(ib * tx + ia * ty),
                    0.0,
                    0.0,
                    1.0,
                )
            }
        };
        Ok(Self {
            m: inv,
            kind: self.kind,
        })
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Transform2D) -> Self {
        let kind = self.kind.max(other.kind);
        let m = self.m * other.m;
        match kind {
            TransformKind::Homography => Self::homography(m),
            _ => Self { m, kind },
        }
    }

    /// Upper-left 2×2 block.
    pub fn linear(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn translation_part(&self) -> Vector2<f64> {
        Vector2::new(self.m[(0, 2)], self.m[(1, 2)])
    }

    /// Scale and rotation (radians) of a partial-affine or translation transform.
    pub fn scale_rotation(&self) -> (f64, f64) {
        let a = self.m[(0, 0)];
        let b = self.m[(1, 0)];
        ((a * a + b * b).sqrt(), b.atan2(a))
    }

    /// Checks the kind-specific matrix shape to within `tol` per entry.
    pub fn has_consistent_shape(&self, tol: f64) -> bool {
        let m = &self.m;
        let affine_row = m[(2, 0)].abs() <= tol && m[(2, 1)].abs() <= tol && (m[(2, 2)] - 1.0).abs() <= tol;
        match self.kind {
            TransformKind::Translation => {
                affine_row
                    && (m[(0, 0)] - 1.0).abs() <= tol
                    && (m[(1, 1)] - 1.0).abs() <= tol
                    && m[(0, 1)].abs() <= tol
                    && m[(1, 0)].abs() <= tol
            }
            TransformKind::PartialAffine => {
                affine_row
                    && (m[(0, 0)] - m[(1, 1)]).abs() <= tol
                    && (m[(0, 1)] + m[(1, 0)]).abs() <= tol
                    && (m[(0, 0)].powi(2) + m[(1, 0)].powi(2)) > 0.0
            }
            TransformKind::Homography => (m[(2, 2)] - 1.0).abs() <= tol || m[(2, 2)] == 0.0,
        }
    }

    /// Converts a matrix known to be a similarity back into the partial-affine
    /// representation, projecting away round-off.
    pub fn as_partial_affine(&self) -> Self {
        let m = &self.m;
        let a = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        let b = 0.5 * (m[(1, 0)] - m[(0, 1)]);
        Self {
            m: Matrix3::new(a, -b, m[(0, 2)], b, a, m[(1, 2)], 0.0, 0.0, 1.0),
            kind: TransformKind::PartialAffine,
        }
    }

    /// Nine values, row-major.
    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

/// Plain decimal text with nine significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Round-up (e.g. 9.99999999995) can add a digit; that is still 9 significant.
    if s == "-0" { "0".to_string() } else { s }
}

/// `id m00 m01 m02 m10 m11 m12 m20 m21 m22`.
pub fn transform_line(id: &str, t: &Transform2D) -> String {
    let vals: Vec<String> = t.row_major().iter().map(|&v| format_sig9(v)).collect();
    format!("{id} {}", vals.join(" "))
}

/// Parses lines written by [`transform_line`]; blank lines and `#` comments are skipped.
pub fn parse_transform_lines(text: &str) -> Result<Vec<(String, Transform2D)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 10 {
            return Err(Error::InvalidParameter(format!("transform line {}: expected 10 fields", i + 1)));
        }
        let mut v = [0.0; 9];
        for (k, p) in parts[1..].iter().enumerate() {
            v[k] = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("transform line {}: bad number `{p}`", i + 1)))?;
        }
        let m = Matrix3::from_row_slice(&v);
        out.push((parts[0].to_string(), Transform2D::classify(m)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    None,
    TooFewPrefilter,
    TooFewInliers,
    MotionViolation,
    RmsTooHigh,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::None => "accepted",
            RejectReason::TooFewPrefilter => "too_few_prefilter",
            RejectReason::TooFewInliers => "too_few_inliers",
            RejectReason::MotionViolation => "motion_violation",
            RejectReason::RmsTooHigh => "rms_too_high",
        })
    }
}

/// Outcome of gating one ordered image pair.
///
/// `transform` maps pixel coordinates of the later image into the earlier
/// image's frame, so a forward-moving camera yields a positive `t_along`.
/// `matches` keep their original (earlier, later) orientation.
#[derive(Debug, Clone)]
pub struct PairVerdict {
    pub accepted: bool,
    pub transform: Option<Transform2D>,
    pub matches: MatchSet,
    pub rms_px: f64,
    pub reject_reason: RejectReason,
    pub inliers: usize,
    pub motion: Option<MotionSummary>,
}

impl PairVerdict {
    pub fn rejected(reason: RejectReason, matches: MatchSet) -> Self {
        debug_assert!(reason != RejectReason::None);
        Self {
            accepted: false,
            transform: None,
            matches,
            rms_px: f64::NAN,
            reject_reason: reason,
            inliers: 0,
            motion: None,
        }
    }
}
