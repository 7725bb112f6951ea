//! Chains, refines, levels and composites one batch of synthetic frames.

use rowstitch::batch::{chain_global_transforms, composite_batch, level_batch, refine_batch};
use rowstitch::features::{detect_features, match_features, restrict_to_edge, DEFAULT_GRID, DEFAULT_MAX_HAMMING, DEFAULT_MAX_PER_CELL, DEFAULT_RATIO};
use rowstitch::gate::accept_pair;
use rowstitch::model::{PipelineConfig, StitchDirection};
use rowstitch::synth::{generate_scene, render_sequence, Texture, TrajectorySpec};

fn main() -> rowstitch::Result<()> {
    let traj = TrajectorySpec {
        seed: 3,
        n_frames: 19,
        ..TrajectorySpec::default()
    };
    let seq = render_sequence(&generate_scene(&traj.scene_for(3, Texture::BlobField))?, &traj)?;
    let cfg = PipelineConfig::default();
    let dir = StitchDirection::FORWARD_X;

    // Every third frame: far enough apart for the edge bands to overlap.
    let picks: Vec<usize> = (0..seq.frames.len()).step_by(3).collect();
    let feats = picks
        .iter()
        .map(|&k| detect_features(&seq.frames[k], DEFAULT_MAX_PER_CELL, DEFAULT_GRID))
        .collect::<rowstitch::Result<Vec<_>>>()?;
    let mut links = Vec::new();
    let mut matches = Vec::new();
    for w in 0..picks.len() - 1 {
        let m = match_features(
            &restrict_to_edge(&feats[w], dir, cfg.edge_fraction, true),
            &restrict_to_edge(&feats[w + 1], dir, cfg.edge_fraction, false),
            DEFAULT_MAX_HAMMING,
            DEFAULT_RATIO,
        );
        let v = accept_pair(&seq.frames[picks[w]], &seq.frames[picks[w + 1]], &m, &cfg);
        println!("{} -> {}: {} ({} inliers)", picks[w], picks[w + 1], v.reject_reason, v.inliers);
        let Some(t) = v.transform else { return Ok(()) };
        links.push(t);
        matches.push(v.matches);
    }

    let dims: Vec<(u32, u32)> = picks.iter().map(|&k| seq.frames[k].dims()).collect();
    let chained = chain_global_transforms(&dims, &links)?;
    let refined = refine_batch(&chained, &matches)?;
    println!("refinement: {} iterations, converged {}", refined.iterations, refined.converged);
    let (leveled, angle) = level_batch(&refined.placements, dir)?;
    println!("leveled by {:.3} deg", angle.to_degrees());
    let images: Vec<_> = picks.iter().map(|&k| &seq.frames[k].pixels).collect();
    let canvas = composite_batch(&images, &leveled, dir, cfg.blend_levels)?;
    let path = std::env::temp_dir().join("rowstitch_batch.png");
    canvas.pixels.save(&path)?;
    println!("batch canvas {}x{} -> {}", canvas.width(), canvas.height(), path.display());
    Ok(())
}
