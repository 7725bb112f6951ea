//! Runs the acceptance cascade on a real overlap and on two rigged match sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rowstitch::features::{detect_features, match_features, MatchSet, DEFAULT_GRID, DEFAULT_MAX_HAMMING, DEFAULT_MAX_PER_CELL, DEFAULT_RATIO};
use rowstitch::gate::{accept_pair, accept_pair_dims, verdict_line};
use rowstitch::model::{ImageRecord, PipelineConfig, Point, Transform2D};
use rowstitch::synth::{generate_scene, SceneSpec};

fn main() -> rowstitch::Result<()> {
    let cfg = PipelineConfig::default();
    let scene = generate_scene(&SceneSpec {
        seed: 4,
        row_length_px: 1200,
        row_height_px: 480,
        ..SceneSpec::default()
    })?;
    let crop = |x| image::imageops::crop_imm(&scene, x, 0, 640, 480).to_image();
    let a = ImageRecord::new("a", 0, crop(0))?;
    let b = ImageRecord::new("b", 1, crop(420))?;
    let fa = detect_features(&a, DEFAULT_MAX_PER_CELL, DEFAULT_GRID)?;
    let fb = detect_features(&b, DEFAULT_MAX_PER_CELL, DEFAULT_GRID)?;
    let raw = match_features(&fa, &fb, DEFAULT_MAX_HAMMING, DEFAULT_RATIO);
    let v = accept_pair(&a, &b, &raw, &cfg);
    println!("{}", verdict_line("a", "b", &v));

    // Sideways drift as large as the forward motion.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Transform2D::translation(480.0, 480.0);
    let pb: Vec<Point> = (0..80).map(|_| Point::new(rng.random_range(0.0..160.0), rng.random_range(0.0..480.0))).collect();
    let drift = MatchSet::from_points(pb.iter().map(|p| t.apply(p)).collect(), pb);
    println!("{}", verdict_line("drift_a", "drift_b", &accept_pair_dims((640, 480), (640, 480), &drift, &cfg)));

    let few = drift.select(0..10);
    println!("{}", verdict_line("few_a", "few_b", &accept_pair_dims((640, 480), (640, 480), &few, &cfg)));
    Ok(())
}
