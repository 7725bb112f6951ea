//! Detects corners in two overlapping frames and matches their edge bands.

use rowstitch::features::{
    detect_features, match_features, restrict_to_edge, DEFAULT_GRID, DEFAULT_MAX_HAMMING, DEFAULT_MAX_PER_CELL,
    DEFAULT_RATIO,
};
use rowstitch::model::{ImageRecord, StitchDirection};
use rowstitch::synth::{generate_scene, SceneSpec};

fn main() -> rowstitch::Result<()> {
    let scene = generate_scene(&SceneSpec {
        seed: 1,
        row_length_px: 1200,
        row_height_px: 480,
        ..SceneSpec::default()
    })?;
    let crop = |x| image::imageops::crop_imm(&scene, x, 0, 640, 480).to_image();
    let a = ImageRecord::new("a", 0, crop(0))?;
    let b = ImageRecord::new("b", 1, crop(400))?;

    let fa = detect_features(&a, DEFAULT_MAX_PER_CELL, DEFAULT_GRID)?;
    let fb = detect_features(&b, DEFAULT_MAX_PER_CELL, DEFAULT_GRID)?;
    println!("keypoints: a {}, b {}", fa.len(), fb.len());

    let dir = StitchDirection::FORWARD_X;
    let ea = restrict_to_edge(&fa, dir, 0.25, true);
    let eb = restrict_to_edge(&fb, dir, 0.25, false);
    let m = match_features(&ea, &eb, DEFAULT_MAX_HAMMING, DEFAULT_RATIO);
    println!("edge-band keypoints: a {}, b {}; matches {}", ea.len(), eb.len(), m.len());

    let mut dx: Vec<f64> = m.points_a.iter().zip(&m.points_b).map(|(p, q)| p.x - q.x).collect();
    dx.sort_by(f64::total_cmp);
    if let Some(med) = dx.get(dx.len() / 2) {
        println!("median x offset {med:.1} px (true 400)");
    }
    Ok(())
}
