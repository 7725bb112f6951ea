//! Full pipeline on a synthetic row, scored against its ground truth.

use std::time::Instant;

use rowstitch::georef::{compare_control_points, georeference_report};
use rowstitch::model::PipelineConfig;
use rowstitch::pipeline::{stitch_images, write_outputs, StitchOptions};
use rowstitch::synth::{generate_scene, locate_landmarks, render_sequence, Texture, TrajectorySpec, CONTROL_POINT_STRIDE};

fn main() -> rowstitch::Result<()> {
    let frames = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(80);
    let traj = TrajectorySpec {
        seed: 5,
        n_frames: frames,
        ..TrajectorySpec::default()
    };
    let t0 = Instant::now();
    let seq = render_sequence(&generate_scene(&traj.scene_for(5, Texture::BlobField))?, &traj)?;
    let out = stitch_images(&seq.frames, &PipelineConfig::default(), &StitchOptions::default())?;
    println!(
        "{} of {} frames in {} batches -> {}x{} in {:.1} s",
        out.used.len(),
        frames,
        out.batch_count,
        out.mosaic.width(),
        out.mosaic.height(),
        t0.elapsed().as_secs_f64()
    );

    let (truth, found) = locate_landmarks(&seq, CONTROL_POINT_STRIDE, &out.used, |j, p| out.map.map_point(j, p))?;
    let cross = compare_control_points(&truth, &found, None)?;
    println!(
        "landmarks {}: slope {:.5}, MAE {:.1} px ({:.3}% of length)",
        cross.n,
        cross.slope,
        cross.mae_px,
        100.0 * cross.mae_px / out.mosaic.width() as f64
    );
    print!("geo fit\n{}", georeference_report(&found, true)?);

    let dir = std::env::temp_dir().join("rowstitch_out");
    write_outputs(&dir, &out)?;
    println!("reports in {}", dir.display());
    Ok(())
}
