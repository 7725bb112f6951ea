//! Acceptance cascade for one ordered image pair: edge filter, RANSAC, motion
//! check, error pruning with refit, RMS threshold.

use crate::features::{in_edge_band, MatchSet};
use crate::geometry::{decompose_motion, fit_model, ransac_fit, reprojection_errors, RansacParams};
use crate::model::{ImageRecord, PairVerdict, PipelineConfig, RejectReason, StitchDirection};

/// Keeps pairs whose earlier-image point lies in the forward band and whose
/// later-image point lies in the trailing band.
pub fn filter_by_stitching_edge(
    m: &MatchSet,
    dims_a: (u32, u32),
    dims_b: (u32, u32),
    dir: StitchDirection,
    edge_fraction: f64,
) -> MatchSet {
    let ext_a = dir.extent(dims_a);
    let ext_b = dir.extent(dims_b);
    m.filter(|i| {
        in_edge_band(&m.points_a[i], ext_a, dir, edge_fraction, true)
            && in_edge_band(&m.points_b[i], ext_b, dir, edge_fraction, false)
    })
}

/// Indices (into `errors`) that survive dropping the `ceil(fraction × n)`
/// largest errors. Ties are broken by index so the result is deterministic.
pub fn prune_worst(errors: &[f64], fraction: f64) -> Vec<usize> {
    let n = errors.len();
    let drop = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| errors[i].total_cmp(&errors[j]).then(i.cmp(&j)));
    let mut keep = order[..n - drop].to_vec();
    keep.sort_unstable();
    keep
}

/// Runs the cascade on raw matches oriented (a = earlier, b = later).
pub fn accept_pair(a: &ImageRecord, b: &ImageRecord, raw: &MatchSet, cfg: &PipelineConfig) -> PairVerdict {
    accept_pair_dims(a.dims(), b.dims(), raw, cfg)
}

/// Same as [`accept_pair`] when only the image sizes are at hand.
pub fn accept_pair_dims(dims_a: (u32, u32), dims_b: (u32, u32), raw: &MatchSet, cfg: &PipelineConfig) -> PairVerdict {
    let dir = cfg.motion.direction();
    let filtered = filter_by_stitching_edge(raw, dims_a, dims_b, dir, cfg.edge_fraction);
    if filtered.len() < cfg.min_prefilter_matches {
        return PairVerdict::rejected(RejectReason::TooFewPrefilter, filtered);
    }

    // Fit later -> earlier.
    let kind = cfg.ransac_kind();
    let params = RansacParams::from_config(cfg, kind);
    let flipped = filtered.swapped();
    let fit = match ransac_fit(&flipped.points_a, &flipped.points_b, &params) {
        Ok(f) if f.inlier_count() >= cfg.min_inliers => f,
        Ok(f) => {
            let mut v = PairVerdict::rejected(RejectReason::TooFewInliers, filtered);
            v.inliers = f.inlier_count();
            return v;
        }
        Err(_) => return PairVerdict::rejected(RejectReason::TooFewInliers, filtered),
    };
    let inliers = filtered.select(fit.inlier_indices());

    let check_motion = |t| decompose_motion(t, dims_b.0, dims_b.1, dir).ok().filter(|m| cfg.motion.admits(m, dims_b));
    let Some(motion) = check_motion(&fit.transform) else {
        let mut v = PairVerdict::rejected(RejectReason::MotionViolation, inliers);
        v.inliers = fit.inlier_count();
        v.motion = decompose_motion(&fit.transform, dims_b.0, dims_b.1, dir).ok();
        return v;
    };

    let Ok((errs, _)) = reprojection_errors(&fit.transform, &inliers.swapped()) else {
        return PairVerdict::rejected(RejectReason::TooFewInliers, inliers);
    };
    let survivors = inliers.select(prune_worst(&errs, cfg.prune_fraction));
    let flipped = survivors.swapped();
    let refined = match fit_model(kind, &flipped.points_a, &flipped.points_b) {
        Ok(t) => t,
        Err(_) => {
            let mut v = PairVerdict::rejected(RejectReason::TooFewInliers, survivors);
            v.motion = Some(motion);
            return v;
        }
    };
    let n = survivors.len();
    let Some(final_motion) = check_motion(&refined) else {
        let mut v = PairVerdict::rejected(RejectReason::MotionViolation, survivors);
        v.inliers = n;
        v.transform = Some(refined);
        v.motion = decompose_motion(&refined, dims_b.0, dims_b.1, dir).ok();
        return v;
    };
    let rms = match reprojection_errors(&refined, &flipped) {
        Ok((_, r)) => r,
        Err(_) => f64::INFINITY,
    };
    let accepted = rms <= cfg.max_rms_px;
    PairVerdict {
        accepted,
        transform: Some(refined),
        matches: survivors,
        rms_px: rms,
        reject_reason: if accepted { RejectReason::None } else { RejectReason::RmsTooHigh },
        inliers: n,
        motion: Some(final_motion),
    }
}

/// `a_id b_id verdict inliers rms t_along t_ortho scale rot_deg`
pub fn verdict_line(a_id: &str, b_id: &str, v: &PairVerdict) -> String {
    let num = |x: f64| if x.is_finite() { format!("{x:.3}") } else { "nan".to_string() };
    let (ta, to, s, r) = match &v.motion {
        Some(m) => (num(m.t_along), num(m.t_ortho), format!("{:.5}", m.scale), num(m.rotation_deg)),
        None => ("nan".into(), "nan".into(), "nan".into(), "nan".into()),
    };
    format!("{a_id} {b_id} {} {} {} {ta} {to} {s} {r}", v.reject_reason, v.inliers, num(v.rms_px))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reprojection_errors;
    use crate::model::{Point, Transform2D, WarpMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random matches in the shared strip of two 640×480 frames related by
    /// `later_to_earlier`.
    fn synthetic(t: &Transform2D, n: usize, seed: u64) -> MatchSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::new();
        let mut b = Vec::new();
        while a.len() < n {
            let pb = Point::new(rng.random_range(0.0..160.0), rng.random_range(20.0..460.0));
            let pa = t.apply(&pb);
            if pa.x >= 480.0 && pa.x < 640.0 && pa.y >= 0.0 && pa.y < 480.0 {
                a.push(pa);
                b.push(pb);
            }
        }
        MatchSet::from_points(a, b)
    }

    #[test]
    fn edge_filter_examples() {
        let d = StitchDirection::FORWARD_X;
        let m = MatchSet::from_points(
            vec![Point::new(900.0, 10.0), Point::new(400.0, 10.0)],
            vec![Point::new(50.0, 10.0), Point::new(50.0, 10.0)],
        );
        let f = filter_by_stitching_edge(&m, (1000, 800), (1000, 800), d, 0.25);
        assert_eq!(f.points_a, vec![Point::new(900.0, 10.0)]);
    }

    #[test]
    fn edge_filter_half_keeps_correct_halves() {
        // 20×20 grid of positions in each image, all combinations along x.
        let d = StitchDirection::FORWARD_X;
        let xs: Vec<f64> = (0..20).map(|i| 25.0 + 50.0 * i as f64).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &xa in &xs {
            for &xb in &xs {
                a.push(Point::new(xa, 5.0));
                b.push(Point::new(xb, 5.0));
            }
        }
        let m = MatchSet::from_points(a, b);
        let f = filter_by_stitching_edge(&m, (1000, 100), (1000, 100), d, 0.5);
        // 10 positions in the right half of a times 10 in the left half of b.
        assert_eq!(f.len(), 100);
        assert!(f.points_a.iter().all(|p| p.x >= 500.0));
        assert!(f.points_b.iter().all(|p| p.x <= 500.0));
    }

    #[test]
    fn shifted_pair_accepted_with_true_shift() {
        let t = Transform2D::translation(480.0, 0.0);
        let m = synthetic(&t, 120, 1);
        let cfg = PipelineConfig::default();
        let v = accept_pair_dims((640, 480), (640, 480), &m, &cfg);
        assert!(v.accepted, "{:?}", v.reject_reason);
        assert!((v.motion.unwrap().t_along - 480.0).abs() < 1.0);
        assert_eq!(v.inliers, 120 - 24);
    }

    #[test]
    fn drift_pair_is_motion_violation() {
        // 45° drift: t_ortho equals t_along.
        let t = Transform2D::translation(480.0, 480.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..80 {
            let pb = Point::new(rng.random_range(0.0..160.0), rng.random_range(0.0..480.0));
            a.push(t.apply(&pb));
            b.push(pb);
        }
        let cfg = PipelineConfig::default();
        let v = accept_pair_dims((640, 480), (640, 480), &MatchSet::from_points(a, b), &cfg);
        assert_eq!(v.reject_reason, RejectReason::MotionViolation);
        assert!(!v.accepted);
    }

    #[test]
    fn under_count_is_too_few_prefilter() {
        let m = synthetic(&Transform2D::translation(480.0, 0.0), 10, 3);
        let v = accept_pair_dims((640, 480), (640, 480), &m, &PipelineConfig::default());
        assert_eq!(v.reject_reason, RejectReason::TooFewPrefilter);
        assert_eq!(v.inliers, 0);
        assert!(v.transform.is_none());
    }

    #[test]
    fn noisy_pair_with_outliers_gates_and_prunes() {
        let t = Transform2D::similarity(1.01, 1f64.to_radians(), 470.0, 4.0);
        let mut m = synthetic(&t, 100, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in m.points_a.iter_mut() {
            p.x += rng.random_range(-0.5..0.5);
            p.y += rng.random_range(-0.5..0.5);
        }
        for i in 0..20 {
            m.points_a[i].y = rng.random_range(0.0..480.0);
        }
        for mode in [WarpMode::PartialAffine, WarpMode::Perspective] {
            let cfg = PipelineConfig {
                warp_mode: mode,
                ..Default::default()
            };
            let v = accept_pair_dims((640, 480), (640, 480), &m, &cfg);
            assert!(v.accepted);
            assert_eq!(v.inliers, v.matches.len());
            assert!(v.matches.len() < 100);
            let motion = v.motion.unwrap();
            assert!(cfg.motion.admits(&motion, (640, 480)));
            let (_, rms) = reprojection_errors(&v.transform.unwrap(), &v.matches.swapped()).unwrap();
            assert!(rms <= cfg.max_rms_px);
            assert!((rms - v.rms_px).abs() < 1e-12);
        }
    }

    #[test]
    fn prune_drops_largest_errors() {
        let errs = [0.5, 3.0, 1.0, 2.0, 0.1];
        let keep = prune_worst(&errs, 0.2);
        assert_eq!(keep, vec![0, 2, 3, 4]);
        let keep = prune_worst(&errs, 0.5);
        assert_eq!(keep, vec![0, 4]);
        assert_eq!(prune_worst(&errs, 0.0).len(), 5);
    }

    #[test]
    fn verdict_line_format() {
        let v = PairVerdict::rejected(RejectReason::TooFewPrefilter, MatchSet::default());
        assert_eq!(verdict_line("a", "b", &v), "a b too_few_prefilter 0 nan nan nan nan nan");
    }
}
