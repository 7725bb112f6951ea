//! Planar transform estimation: normalized DLT, closed-form similarity,
//! median translation, seeded RANSAC, symmetric transfer error and motion
//! decomposition.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::model::{PipelineConfig, Point, StitchDirection, Transform2D, TransformKind};

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub transform: Transform2D,
    pub inlier_mask: Vec<bool>,
    /// RMS symmetric transfer error over inliers.
    pub rms_px: f64,
}

impl FitResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn inlier_indices(&self) -> Vec<usize> {
        self.inlier_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Camera motion implied by a transform, measured at the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSummary {
    pub t_along: f64,
    pub t_ortho: f64,
    pub rotation_deg: f64,
    pub scale: f64,
}

/// Hartley normalization: centroid to the origin, mean distance √2.
fn normalizer(points: &[Point]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 1e-12) {
        return Err(Error::Degenerate("all points coincide"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply_affine(m: &Matrix3<f64>, p: &Point) -> Point {
    Point::new(
        m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)],
        m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)],
    )
}

fn has_collinear_triple(points: &[Point]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let u = points[j] - points[i];
                let v = points[k] - points[i];
                if (u.x * v.y - u.y * v.x).abs() < 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized direct linear transform. Returns `H` with `H(a_i) ≈ b_i`.
pub fn fit_homography_dlt(points_a: &[Point], points_b: &[Point]) -> Result<Transform2D> {
    let n = points_a.len();
    if n < 4 || points_b.len() != n {
        return Err(Error::TooFewPoints { needed: 4, got: n.min(points_b.len()) });
    }
    let ta = normalizer(points_a)?;
    let tb = normalizer(points_b)?;
    let na: Vec<Point> = points_a.iter().map(|p| apply_affine(&ta, p)).collect();
    let nb: Vec<Point> = points_b.iter().map(|p| apply_affine(&tb, p)).collect();
    if n == 4 && (has_collinear_triple(&na) || has_collinear_triple(&nb)) {
        return Err(Error::Degenerate("three of four points are collinear"));
    }

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in na.iter().zip(&nb).enumerate() {
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let r0 = 2 * i;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        let r1 = r0 + 1;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Degenerate("SVD did not converge"))?;
    // Singular values are sorted in decreasing order.
    let sv = &svd.singular_values;
    let smallest = (0..sv.len()).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap();
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|x, y| y.total_cmp(x));
    if sorted[7] <= 1e-10 * sorted[0] {
        return Err(Error::Degenerate("design matrix has rank below 8"));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let tb_inv = tb.try_inverse().ok_or(Error::Degenerate("normalization"))?;
    let m = tb_inv * hn * ta;
    if m[(2, 2)].abs() < 1e-300 {
        return Err(Error::Degenerate("homography maps the origin to infinity"));
    }
    let t = Transform2D::homography(m);
    if !t.is_invertible() {
        return Err(Error::Degenerate("fitted homography is singular"));
    }
    Ok(t)
}

/// Least-squares similarity (uniform scale, rotation, translation).
pub fn fit_partial_affine(points_a: &[Point], points_b: &[Point]) -> Result<Transform2D> {
    let n = points_a.len();
    if n < 2 || points_b.len() != n {
        return Err(Error::TooFewPoints { needed: 2, got: n.min(points_b.len()) });
    }
    let nf = n as f64;
    let ca = points_a.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / nf;
    let cb = points_b.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / nf;
    let (mut sxx, mut dot, mut cross) = (0.0, 0.0, 0.0);
    for (p, q) in points_a.iter().zip(points_b) {
        let u = p.coords - ca;
        let v = q.coords - cb;
        sxx += u.norm_squared();
        dot += u.dot(&v);
        cross += u.x * v.y - u.y * v.x;
    }
    if !(sxx > 1e-12) {
        return Err(Error::Degenerate("all source points coincide"));
    }
    let a = dot / sxx;
    let b = cross / sxx;
    if a * a + b * b < 1e-24 {
        return Err(Error::Degenerate("destination points coincide"));
    }
    let t = cb - Matrix2::new(a, -b, b, a) * ca;
    let scale = (a * a + b * b).sqrt();
    Ok(Transform2D::similarity(scale, b.atan2(a), t.x, t.y))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Component-wise median displacement.
pub fn fit_translation(points_a: &[Point], points_b: &[Point]) -> Result<Transform2D> {
    let n = points_a.len().min(points_b.len());
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let mut dx: Vec<f64> = points_a.iter().zip(points_b).map(|(p, q)| q.x - p.x).collect();
    let mut dy: Vec<f64> = points_a.iter().zip(points_b).map(|(p, q)| q.y - p.y).collect();
    Ok(Transform2D::translation(median(&mut dx), median(&mut dy)))
}

/// Least-squares fit of the requested model kind.
pub fn fit_model(kind: TransformKind, points_a: &[Point], points_b: &[Point]) -> Result<Transform2D> {
    match kind {
        TransformKind::Translation => fit_translation(points_a, points_b),
        TransformKind::PartialAffine => fit_partial_affine(points_a, points_b),
        TransformKind::Homography => fit_homography_dlt(points_a, points_b),
    }
}

/// `½(‖t(a) − b‖ + ‖t⁻¹(b) − a‖)`.
#[inline]
pub fn symmetric_transfer_error(t: &Transform2D, inv: &Transform2D, a: &Point, b: &Point) -> f64 {
    0.5 * ((t.apply(a) - b).norm() + (inv.apply(b) - a).norm())
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Per-pair symmetric transfer errors and their RMS, with `t` mapping side a to side b.
pub fn reprojection_errors(t: &Transform2D, matches: &MatchSet) -> Result<(Vec<f64>, f64)> {
    let inv = t.inverse()?;
    let errs: Vec<f64> = matches
        .points_a
        .iter()
        .zip(&matches.points_b)
        .map(|(a, b)| symmetric_transfer_error(t, &inv, a, b))
        .collect();
    let r = rms(errs.iter().copied());
    Ok((errs, r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub kind: TransformKind,
    pub threshold_px: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Stop once the inlier fraction reaches 0.9.
    pub early_exit: bool,
}

impl RansacParams {
    pub fn from_config(cfg: &PipelineConfig, kind: TransformKind) -> Self {
        Self {
            kind,
            threshold_px: cfg.ransac_threshold_px,
            iterations: cfg.ransac_iterations,
            seed: cfg.ransac_seed,
            early_exit: false,
        }
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Advances a sorted k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

struct Scored {
    transform: Transform2D,
    count: usize,
    rms: f64,
}

fn score(t: Transform2D, a: &[Point], b: &[Point], threshold: f64) -> Option<(Scored, Vec<bool>)> {
    let inv = t.inverse().ok()?;
    let mut mask = Vec::with_capacity(a.len());
    let (mut count, mut sq) = (0usize, 0.0f64);
    for (p, q) in a.iter().zip(b) {
        let e = symmetric_transfer_error(&t, &inv, p, q);
        let ok = e.is_finite() && e <= threshold;
        if ok {
            count += 1;
            sq += e * e;
        }
        mask.push(ok);
    }
    let rms = if count > 0 { (sq / count as f64).sqrt() } else { f64::INFINITY };
    Some((Scored { transform: t, count, rms }, mask))
}

/// Seeded RANSAC with least-squares refit on the consensus set.
///
/// Hypotheses are ranked by inlier count, then by lower inlier RMS, then by
/// earlier iteration. When the iteration budget covers every minimal subset the
/// subsets are enumerated exhaustively instead of sampled.
pub fn ransac_fit(points_a: &[Point], points_b: &[Point], params: &RansacParams) -> Result<FitResult> {
    let n = points_a.len();
    let k = params.kind.min_samples();
    if n < k || points_b.len() != n {
        return Err(Error::TooFewPoints { needed: k, got: n.min(points_b.len()) });
    }
    if !(params.threshold_px > 0.0) {
        return Err(Error::InvalidParameter("RANSAC threshold must be positive".into()));
    }
    let mut best: Option<Scored> = None;
    let mut sa = Vec::with_capacity(k);
    let mut sb = Vec::with_capacity(k);
    let mut consider = |sample: &[usize], best: &mut Option<Scored>| -> bool {
        sa.clear();
        sb.clear();
        for &i in sample {
            sa.push(points_a[i]);
            sb.push(points_b[i]);
        }
        let Ok(t) = fit_model(params.kind, &sa, &sb) else {
            return false;
        };
        let Some((s, _)) = score(t, points_a, points_b, params.threshold_px) else {
            return false;
        };
        let better = match best {
            None => true,
            Some(b) => s.count > b.count || (s.count == b.count && s.rms < b.rms),
        };
        if better {
            *best = Some(s);
        }
        params.early_exit && best.as_ref().is_some_and(|b| b.count as f64 >= 0.9 * n as f64)
    };

    match binomial(n, k) {
        Some(total) if total <= params.iterations => {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                if consider(&idx, &mut best) || !next_combination(&mut idx, n) {
                    break;
                }
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            for _ in 0..params.iterations {
                let sample = rand::seq::index::sample(&mut rng, n, k).into_vec();
                if consider(&sample, &mut best) {
                    break;
                }
            }
        }
    }

    let best = best.filter(|b| b.count >= k).ok_or(Error::NoConsensus)?;
    let (_, best_mask) = score(best.transform, points_a, points_b, params.threshold_px).ok_or(Error::NoConsensus)?;
    let inl: Vec<usize> = (0..n).filter(|&i| best_mask[i]).collect();
    let ia: Vec<Point> = inl.iter().map(|&i| points_a[i]).collect();
    let ib: Vec<Point> = inl.iter().map(|&i| points_b[i]).collect();

    // A refit that loses support falls back to the winning hypothesis.
    let (chosen, mask) = match fit_model(params.kind, &ia, &ib)
        .ok()
        .and_then(|t| score(t, points_a, points_b, params.threshold_px))
    {
        Some((s, m)) if s.count >= best.count => (s, m),
        _ => (best, best_mask),
    };
    Ok(FitResult {
        transform: chosen.transform,
        inlier_mask: mask,
        rms_px: chosen.rms,
    })
}

/// Jacobian of `t` at `p`.
pub fn jacobian_at(t: &Transform2D, p: &Point) -> Matrix2<f64> {
    let m = t.matrix();
    let a = t.linear();
    match t.kind() {
        TransformKind::Homography => {
            let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
            let q = t.apply(p);
            let g = Vector2::new(m[(2, 0)], m[(2, 1)]);
            (a - q.coords * g.transpose()) / w
        }
        _ => a,
    }
}

/// Motion of the image center under `t` plus rotation/scale from the polar
/// decomposition of the local Jacobian.
pub fn decompose_motion(t: &Transform2D, width: u32, height: u32, dir: StitchDirection) -> Result<MotionSummary> {
    if !t.is_invertible() {
        return Err(Error::NotInvertible);
    }
    let c = Point::new(width as f64 / 2.0, height as f64 / 2.0);
    let d = t.apply(&c) - c;
    let j = jacobian_at(t, &c);
    let det = j.determinant();
    if !(det.abs() > 1e-12) || !det.is_finite() {
        return Err(Error::NotInvertible);
    }
    // Rotation factor of J = R S for a 2×2 matrix.
    let mut rot = (j[(1, 0)] - j[(0, 1)]).atan2(j[(0, 0)] + j[(1, 1)]).to_degrees();
    if rot <= -180.0 {
        rot += 360.0;
    }
    Ok(MotionSummary {
        t_along: dir.along(d),
        t_ortho: dir.ortho(d),
        rotation_deg: rot,
        scale: det.abs().sqrt(),
    })
}
