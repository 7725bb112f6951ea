use proptest::prelude::*;

use nalgebra::Matrix3;
use rowstitch::compositor::{find_seam, min_cost_seam, multiband_blend};
use rowstitch::features::{match_features, Descriptor, FeatureSet, Keypoint, MatchSet};
use rowstitch::gate::accept_pair_dims;
use rowstitch::geometry::{decompose_motion, fit_homography_dlt, ransac_fit, reprojection_errors, RansacParams};
use rowstitch::georef::{compare_control_points, fit_axis_regression, ControlPoint};
use rowstitch::model::{
    MotionConstraints, PairVerdict, PipelineConfig, Point, RejectReason, StitchAxis, StitchDirection, Transform2D,
    TransformKind, WarpMode,
};
use rowstitch::sequencer::{build_batches, build_chain, ChainMode};

fn config() -> impl Strategy<Value = PipelineConfig> {
    (
        (1usize..8, 3usize..20, 0.05f64..0.5, 4usize..200, 0.5f64..10.0),
        (1usize..5000, any::<u64>(), 4usize..60, 0.0f64..0.5, 0.5f64..8.0),
        (any::<bool>(), 1usize..7, 0.5f64..20.0, any::<bool>(), any::<bool>()),
        (0.1f64..2.0, 0.5f64..1.0, 1.0f64..2.0, 1.0f64..60.0, proptest::option::of(1.0f64..100.0)),
    )
        .prop_map(|(a, b, c, d)| PipelineConfig {
            window: a.0,
            batch_size: a.1,
            edge_fraction: a.2,
            min_prefilter_matches: a.3,
            ransac_threshold_px: a.4,
            ransac_iterations: b.0,
            ransac_seed: b.1,
            min_inliers: b.2,
            prune_fraction: b.3,
            max_rms_px: b.4,
            warp_mode: if c.0 { WarpMode::Perspective } else { WarpMode::PartialAffine },
            blend_levels: c.1,
            straighten_tolerance_px: c.2,
            motion: MotionConstraints {
                stitch_axis: if c.3 { StitchAxis::Horizontal } else { StitchAxis::Vertical },
                stitch_sign: if c.4 { 1 } else { -1 },
                min_advance_px: d.4,
                max_ortho_ratio: d.0,
                scale_bounds: [d.1, d.2],
                max_rotation_deg: d.3,
            },
        })
}

fn similarity() -> impl Strategy<Value = Transform2D> {
    (0.5f64..2.0, -3.0f64..3.0, -500.0f64..500.0, -500.0f64..500.0)
        .prop_map(|(s, th, tx, ty)| Transform2D::similarity(s, th, tx, ty))
}

fn homography() -> impl Strategy<Value = Matrix3<f64>> {
    (
        prop::array::uniform4(-0.3f64..0.3),
        prop::array::uniform2(-80.0f64..80.0),
        prop::array::uniform2(-3e-4f64..3e-4),
    )
        .prop_map(|(l, t, p)| Matrix3::new(1.0 + l[0], l[1], t[0], l[2], 1.0 + l[3], t[1], p[0], p[1], 1.0))
}

fn points(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0f64..640.0, 0.0f64..480.0).prop_map(|(x, y)| Point::new(x, y)), n)
}

fn project(h: &Matrix3<f64>, p: &Point) -> Point {
    let v = h * nalgebra::Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

fn feature_set(id: &str, descs: &[[u64; 4]]) -> FeatureSet {
    FeatureSet {
        image_id: id.into(),
        width: 640,
        height: 480,
        keypoints: (0..descs.len())
            .map(|i| Keypoint {
                x: i as f64,
                y: 0.0,
                response: 1.0,
                angle: 0.0,
            })
            .collect(),
        descriptors: descs.iter().map(|d| Descriptor(*d)).collect(),
    }
}

/// Descriptors clustered around a few prototypes, so close matches and ties occur.
fn descriptors() -> impl Strategy<Value = Vec<[u64; 4]>> {
    (prop::collection::vec(any::<[u64; 4]>(), 1..6), prop::collection::vec((0usize..6, any::<u64>(), 0u32..4), 0..40))
        .prop_map(|(protos, picks)| {
            picks
                .into_iter()
                .map(|(p, noise, bits)| {
                    let mut d = protos[p % protos.len()];
                    for b in 0..bits {
                        d[(b % 4) as usize] ^= 1 << ((noise >> (b * 8)) % 64);
                    }
                    d
                })
                .collect()
        })
}

fn stub(accept: bool) -> PairVerdict {
    if accept {
        PairVerdict {
            accepted: true,
            transform: Some(Transform2D::identity()),
            matches: MatchSet::default(),
            rms_px: 0.0,
            reject_reason: RejectReason::None,
            inliers: 0,
            motion: None,
        }
    } else {
        PairVerdict::rejected(RejectReason::TooFewInliers, MatchSet::default())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_validation_is_idempotent(cfg in config()) {
        let once = cfg.clone().validate().unwrap();
        prop_assert_eq!(&once, &cfg);
        prop_assert_eq!(once.clone().validate().unwrap(), once.clone());
        let back = PipelineConfig::from_toml_str(&once.to_toml_string()).unwrap();
        prop_assert_eq!(back, once);
    }

    #[test]
    fn composed_transforms_keep_their_shape(a in similarity(), b in similarity(), h in homography()) {
        prop_assert!(a.compose(&b).has_consistent_shape(1e-9));
        prop_assert!(a.inverse().unwrap().has_consistent_shape(1e-9));
        let t = Transform2D::translation(3.0, -4.0);
        prop_assert!(t.compose(&t.inverse().unwrap()).has_consistent_shape(1e-9));
        let hh = Transform2D::homography(h);
        prop_assert!(hh.compose(&a).has_consistent_shape(1e-9));
        prop_assert!(hh.inverse().unwrap().has_consistent_shape(1e-9));
    }

    #[test]
    fn matching_is_symmetric(da in descriptors(), db in descriptors()) {
        let (a, b) = (feature_set("a", &da), feature_set("b", &db));
        let ab = match_features(&a, &b, 64, 0.8);
        let ba = match_features(&b, &a, 64, 0.8);
        let mut x: Vec<(usize, usize)> = ab.pairs.iter().map(|p| (p.index_a, p.index_b)).collect();
        let mut y: Vec<(usize, usize)> = ba.pairs.iter().map(|p| (p.index_b, p.index_a)).collect();
        x.sort_unstable();
        y.sort_unstable();
        prop_assert_eq!(x, y);
        prop_assert!(ab.pairs.iter().all(|p| (0.0..=1.0).contains(&p.score)));
        prop_assert!(ab.is_one_to_one());
    }

    #[test]
    fn dlt_reproduces_exact_homographies(h in homography(), pts in points(8)) {
        let sv = h.singular_values();
        prop_assume!(sv.max() / sv.min() <= 1e4);
        let dst: Vec<Point> = pts.iter().map(|p| project(&h, p)).collect();
        match fit_homography_dlt(&pts, &dst) {
            Ok(t) => {
                let m = t.matrix() / t.matrix()[(2, 2)];
                prop_assert!((m - h).abs().max() < 1e-8);
            }
            // Random points can land nearly collinear.
            Err(_) => prop_assume!(false),
        }
    }

    #[test]
    fn ransac_is_reproducible(h in homography(), pts in points(30), seed in any::<u64>()) {
        let mut dst: Vec<Point> = pts.iter().map(|p| project(&h, p)).collect();
        for q in dst.iter_mut().step_by(4) {
            q.x += 40.0;
        }
        let params = RansacParams { kind: TransformKind::Homography, threshold_px: 3.0, iterations: 300, seed, early_exit: false };
        let a = ransac_fit(&pts, &dst, &params);
        let b = ransac_fit(&pts, &dst, &params);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn reprojection_error_is_symmetric(t in similarity(), a in points(12), b in points(12)) {
        let m = MatchSet::from_points(a, b);
        let (e1, r1) = reprojection_errors(&t, &m).unwrap();
        let (e2, r2) = reprojection_errors(&t.inverse().unwrap(), &m.swapped()).unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
        prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1));
    }

    #[test]
    fn translation_adds_to_motion(t in similarity(), dx in -300.0f64..300.0, dy in -300.0f64..300.0, horizontal in any::<bool>(), forward in any::<bool>()) {
        let dir = StitchDirection {
            axis: if horizontal { StitchAxis::Horizontal } else { StitchAxis::Vertical },
            sign: if forward { 1 } else { -1 },
        };
        let base = decompose_motion(&t, 640, 480, dir).unwrap();
        let shifted = decompose_motion(&Transform2D::translation(dx, dy).compose(&t), 640, 480, dir).unwrap();
        let d = nalgebra::Vector2::new(dx, dy);
        prop_assert!((shifted.t_along - base.t_along - dir.along(d)).abs() < 1e-9);
        prop_assert!((shifted.t_ortho - base.t_ortho - dir.ortho(d)).abs() < 1e-9);
        prop_assert!((shifted.scale - base.scale).abs() < 1e-12);
    }

    #[test]
    fn gate_never_grows_matches(shift in 330.0f64..620.0, drift in -20.0f64..20.0, n in 0usize..120, noise in 0.0f64..6.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = Transform2D::translation(shift, drift);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let pb = Point::new(rng.random_range(0.0..640.0 - shift), rng.random_range(0.0..480.0));
            let mut pa = t.apply(&pb);
            pa.x += rng.random_range(-noise..=noise);
            a.push(pa);
            b.push(pb);
        }
        let raw = MatchSet::from_points(a, b);
        let cfg = PipelineConfig::default();
        let v = accept_pair_dims((640, 480), (640, 480), &raw, &cfg);
        prop_assert!(v.matches.len() <= raw.len());
        prop_assert!(v.inliers <= raw.len());
        if v.accepted {
            prop_assert!(v.matches.len() <= v.inliers);
            prop_assert!(v.rms_px <= cfg.max_rms_px);
            prop_assert!(cfg.motion.admits(&v.motion.unwrap(), (640, 480)));
            let again = accept_pair_dims((640, 480), (640, 480), &raw, &cfg);
            prop_assert_eq!(again.transform, v.transform);
        }
    }

    #[test]
    fn chain_is_farthest_first(n in 2usize..60, window in 1usize..7, d in 1usize..7, batch_size in 3usize..12) {
        let d = d.min(window);
        let out = build_chain(n, window, ChainMode::Strict, |i, j| stub(j - i <= d)).unwrap();
        let used = &out.chain.used_indices;
        prop_assert_eq!(used.len(), (n - 1).div_ceil(d) + 1);
        for link in &out.chain.links {
            for k in link.to + 1..=(link.from + window).min(n - 1) {
                let rejected = out.attempts.iter().any(|a| a.from == link.from && a.to == k && !a.verdict.accepted);
                prop_assert!(rejected);
            }
        }
        let batches = build_batches(&out.chain, batch_size);
        let mut covered: Vec<usize> = batches.iter().flat_map(|b| b.images.clone()).collect();
        covered.dedup();
        prop_assert_eq!(&covered, used);
        for link in &out.chain.links {
            let owners = batches
                .iter()
                .filter(|b| b.images.windows(2).any(|w| w[0] == link.from && w[1] == link.to))
                .count();
            prop_assert_eq!(owners, 1);
        }
    }

    #[test]
    fn seam_never_beats_straight_columns(w in 1usize..10, h in 1usize..10, costs in prop::collection::vec(0.0f64..50.0, 100)) {
        let cost = &costs[..w * h];
        let (path, c) = min_cost_seam(cost, w, h);
        prop_assert!(path.windows(2).all(|p| p[0].abs_diff(p[1]) <= 1));
        for x in 0..w {
            let straight: f64 = (0..h).map(|y| cost[y * w + x]).sum();
            prop_assert!(c <= straight + 1e-9);
        }
    }

    #[test]
    fn blend_of_identical_inputs_is_identity(w in 20u32..80, h in 20u32..60, levels in 1usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = image::RgbImage::from_fn(w, h, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]));
        let m = image::GrayImage::from_pixel(w, h, image::Luma([255]));
        let seam = find_seam(&img, &img, &m, &m, StitchDirection::FORWARD_X).unwrap();
        let out = multiband_blend(&img, &img, &m, &m, &seam, levels);
        prop_assert!(out.pixels().zip(img.pixels()).all(|(p, q)| (0..3).all(|c| p[c].abs_diff(q[c]) <= 1)));
    }

    #[test]
    fn regression_ignores_world_offset(
        pts in prop::collection::vec((0.0f64..100.0, -50.0f64..50.0), 3..20),
        slope in 10.0f64..1000.0,
        offset in -1e3f64..1e3,
    ) {
        let base: Vec<(f64, f64)> = pts.iter().map(|(w, r)| (*w, slope * w + r)).collect();
        let moved: Vec<(f64, f64)> = base.iter().map(|(w, p)| (w + offset, *p)).collect();
        let (Ok(a), Ok(b)) = (fit_axis_regression(&base, true, None), fit_axis_regression(&moved, true, None)) else {
            return Err(TestCaseError::reject("degenerate world values"));
        };
        prop_assert!((a.slope - b.slope).abs() <= 1e-6 * a.slope.abs().max(1.0));
        prop_assert!((a.mae_px - b.mae_px).abs() <= 1e-6 * (1.0 + a.mae_px));
    }

    #[test]
    fn mae_scales_with_residuals(
        pts in prop::collection::vec((0.0f64..100.0, -1.0f64..1.0), 3..20),
        k in 0.1f64..50.0,
        icpt in any::<bool>(),
    ) {
        let build = |s: f64| -> Vec<(f64, f64)> { pts.iter().map(|(w, r)| (*w, 500.0 * w + s * r)).collect() };
        let (Ok(one), Ok(many)) = (fit_axis_regression(&build(1.0), icpt, None), fit_axis_regression(&build(k), icpt, None)) else {
            return Err(TestCaseError::reject("degenerate world values"));
        };
        // Residuals scale exactly; the fitted slope moves with them, so compare in pixels
        // and through the slope.
        prop_assert!((many.mae_px - k * one.mae_px).abs() <= 1e-6 * (1.0 + many.mae_px));
        let cm = |r: &rowstitch::georef::RegressionReport| r.mae_cm.unwrap() * r.slope.abs() / 100.0;
        prop_assert!((cm(&many) - k * cm(&one)).abs() <= 1e-6 * (1.0 + cm(&many)));
    }

    #[test]
    fn self_comparison_is_exact(xs in prop::collection::vec((0.0f64..1e4, 0.0f64..500.0), 2..30)) {
        let pts: Vec<ControlPoint> = xs
            .iter()
            .enumerate()
            .map(|(i, (x, y))| ControlPoint { label: format!("p{i}"), pixel: Point::new(*x + 1.0, *y), world: None })
            .collect();
        let r = compare_control_points(&pts, &pts, Some(100.0)).unwrap();
        prop_assert!((r.slope - 1.0).abs() < 1e-12);
        prop_assert_eq!(r.mae_px, 0.0);
        prop_assert_eq!(r.mae_cm, Some(0.0));
    }
}
