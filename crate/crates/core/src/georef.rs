//! Control points, axis regressions and mosaic accuracy statistics.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GeoRecord, Point, Transform2D};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPoint {
    pub label: String,
    /// Position in the final mosaic.
    pub pixel: Point,
    pub world: Option<GeoRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub slope: f64,
    /// Zero when fitted through the origin.
    pub intercept: f64,
    pub r_squared: f64,
    pub mae_px: f64,
    pub mae_cm: Option<f64>,
    pub n: usize,
    /// Inputs left out for lack of geo data or a matching label.
    pub skipped: usize,
}

impl fmt::Display for RegressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "slope {:.9}", self.slope)?;
        writeln!(f, "intercept {:.9}", self.intercept)?;
        writeln!(f, "r_squared {:.9}", self.r_squared)?;
        writeln!(f, "mae_px {:.6}", self.mae_px)?;
        match self.mae_cm {
            Some(v) => writeln!(f, "mae_cm {v:.6}")?,
            None => writeln!(f, "mae_cm nan")?,
        }
        writeln!(f, "n {}", self.n)?;
        writeln!(f, "skipped {}", self.skipped)
    }
}

/// One used frame with its final composed transform into the mosaic.
#[derive(Debug, Clone)]
pub struct PlacedFrame {
    pub id: String,
    pub dims: (u32, u32),
    pub geo: Option<GeoRecord>,
    pub to_mosaic: Transform2D,
}

/// Maps each frame center into the mosaic. Frames without geo data are counted, not returned.
pub fn register_image_centers(frames: &[PlacedFrame]) -> (Vec<ControlPoint>, usize) {
    let mut skipped = 0;
    let mut out = Vec::new();
    for f in frames {
        let Some(geo) = f.geo else {
            skipped += 1;
            continue;
        };
        let c = Point::new((f.dims.0 - 1) as f64 / 2.0, (f.dims.1 - 1) as f64 / 2.0);
        out.push(ControlPoint {
            label: f.id.clone(),
            pixel: f.to_mosaic.apply(&c),
            world: Some(geo),
        });
    }
    (out, skipped)
}

/// Least squares of `pixel` on `world` over `(world, pixel)` pairs. `cm_per_unit`
/// converts world units to centimetres (default: world in metres).
pub fn fit_axis_regression(
    points: &[(f64, f64)],
    with_intercept: bool,
    cm_per_unit: Option<f64>,
) -> Result<RegressionReport> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let (mw, mp) = if with_intercept {
        (
            points.iter().map(|p| p.0).sum::<f64>() / nf,
            points.iter().map(|p| p.1).sum::<f64>() / nf,
        )
    } else {
        (0.0, 0.0)
    };
    let sww: f64 = points.iter().map(|p| (p.0 - mw).powi(2)).sum();
    let swp: f64 = points.iter().map(|p| (p.0 - mw) * (p.1 - mp)).sum();
    let spp: f64 = points.iter().map(|p| (p.1 - mp).powi(2)).sum();
    let wmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let wmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(sww > 0.0) || wmax - wmin <= 0.0 {
        return Err(Error::Degenerate("zero variance in world coordinates"));
    }
    let slope = swp / sww;
    let intercept = mp - slope * mw;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - (slope * p.0 + intercept)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if spp > 0.0 { (1.0 - ss_res / spp).clamp(0.0, 1.0) } else { 1.0 };
    let mae_px = residuals.iter().map(|r| r.abs()).sum::<f64>() / nf;
    // centimetres per pixel through the fitted scale
    let mae_cm = (slope.abs() > 0.0).then(|| mae_px * cm_per_unit.unwrap_or(100.0) / slope.abs());
    Ok(RegressionReport {
        slope,
        intercept,
        r_squared,
        mae_px,
        mae_cm,
        n,
        skipped: 0,
    })
}

/// Regresses run-b `x` on run-a `x` through the origin over label-matched points.
/// `mae_px` is the mean Euclidean distance between matched points.
pub fn compare_control_points(
    run_a: &[ControlPoint],
    run_b: &[ControlPoint],
    pixels_per_meter: Option<f64>,
) -> Result<RegressionReport> {
    let by_label: HashMap<&str, &ControlPoint> = run_b.iter().map(|c| (c.label.as_str(), c)).collect();
    let pairs: Vec<(&ControlPoint, &ControlPoint)> = run_a
        .iter()
        .filter_map(|a| by_label.get(a.label.as_str()).map(|b| (a, *b)))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: pairs.len() });
    }
    let xy: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (a.pixel.x, b.pixel.x)).collect();
    let mut rep = fit_axis_regression(&xy, false, None)?;
    rep.mae_px = pairs.iter().map(|(a, b)| (a.pixel - b.pixel).norm()).sum::<f64>() / pairs.len() as f64;
    rep.mae_cm = pixels_per_meter.filter(|p| *p > 0.0).map(|p| rep.mae_px / p * 100.0);
    rep.skipped = run_a.len() + run_b.len() - 2 * pairs.len();
    Ok(rep)
}

/// Along-row position in metres: local equirectangular projection, then the
/// principal direction of the point cloud, oriented from the first record to
/// the last and zeroed at the first. Records with `along_row_m` keep that value.
pub fn project_along_row(geo: &[GeoRecord]) -> Vec<f64> {
    if geo.is_empty() {
        return Vec::new();
    }
    let lat0 = geo.iter().map(|g| g.latitude).sum::<f64>() / geo.len() as f64;
    let lon0 = geo.iter().map(|g| g.longitude).sum::<f64>() / geo.len() as f64;
    let k = lat0.to_radians().cos();
    let xy: Vec<(f64, f64)> = geo
        .iter()
        .map(|g| {
            (
                (g.longitude - lon0).to_radians() * k * EARTH_RADIUS_M,
                (g.latitude - lat0).to_radians() * EARTH_RADIUS_M,
            )
        })
        .collect();
    let (sxx, syy, sxy) = xy.iter().fold((0.0, 0.0, 0.0), |s, p| (s.0 + p.0 * p.0, s.1 + p.1 * p.1, s.2 + p.0 * p.1));
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (mut dx, mut dy) = (theta.cos(), theta.sin());
    let first = xy[0];
    let last = xy[xy.len() - 1];
    if (last.0 - first.0) * dx + (last.1 - first.1) * dy < 0.0 {
        dx = -dx;
        dy = -dy;
    }
    geo.iter()
        .zip(&xy)
        .map(|(g, p)| g.along_row_m.unwrap_or((p.0 - first.0) * dx + (p.1 - first.1) * dy))
        .collect()
}

/// Regression of mosaic `x` on along-row metres for geo-tagged control points.
pub fn georeference_report(points: &[ControlPoint], with_intercept: bool) -> Result<RegressionReport> {
    let tagged: Vec<&ControlPoint> = points.iter().filter(|c| c.world.is_some()).collect();
    let geo: Vec<GeoRecord> = tagged.iter().map(|c| c.world.unwrap()).collect();
    let along = project_along_row(&geo);
    let pairs: Vec<(f64, f64)> = along.iter().zip(&tagged).map(|(w, c)| (*w, c.pixel.x)).collect();
    let mut rep = fit_axis_regression(&pairs, with_intercept, None)?;
    rep.skipped = points.len() - tagged.len();
    Ok(rep)
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Sidecar {
        path: path.to_path_buf(),
        line,
        reason: format!("not a number: {tok}"),
    })
}

/// Geo sidecar: one `id latitude longitude` line per image; `#` starts a comment.
pub fn read_geo_sidecar(path: &Path) -> Result<Vec<(String, GeoRecord)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(Error::Sidecar {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected `id lat lon`, got {} fields", tok.len()),
            });
        }
        let geo = GeoRecord::new(parse_f64(tok[1], path, i + 1)?, parse_f64(tok[2], path, i + 1)?)?;
        out.push((tok[0].to_string(), geo));
    }
    Ok(out)
}

/// Control-point file: `label x y [lat lon]` per line.
pub fn read_control_points(path: &Path) -> Result<Vec<ControlPoint>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 && tok.len() != 5 {
            return Err(Error::Sidecar {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected `label x y [lat lon]`".into(),
            });
        }
        let pixel = Point::new(parse_f64(tok[1], path, i + 1)?, parse_f64(tok[2], path, i + 1)?);
        let world = if tok.len() == 5 {
            Some(GeoRecord::new(parse_f64(tok[3], path, i + 1)?, parse_f64(tok[4], path, i + 1)?)?)
        } else {
            None
        };
        out.push(ControlPoint {
            label: tok[0].to_string(),
            pixel,
            world,
        });
    }
    Ok(out)
}

pub fn write_control_points(path: &Path, points: &[ControlPoint]) -> Result<()> {
    let mut s = String::new();
    for c in points {
        s.push_str(&format!("{} {:.3} {:.3}", c.label, c.pixel.x, c.pixel.y));
        if let Some(g) = c.world {
            s.push_str(&format!(" {:.9} {:.9}", g.latitude, g.longitude));
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Fails when any control point lies outside a `width × height` mosaic.
pub fn check_bounds(points: &[ControlPoint], width: u32, height: u32) -> Result<()> {
    for c in points {
        let p = c.pixel;
        if !(p.x >= -0.5 && p.y >= -0.5 && p.x <= width as f64 - 0.5 && p.y <= height as f64 - 0.5) {
            return Err(Error::Georef(format!(
                "control point {} at ({:.1}, {:.1}) lies outside the {width}x{height} mosaic",
                c.label, p.x, p.y
            )));
        }
    }
    Ok(())
}
