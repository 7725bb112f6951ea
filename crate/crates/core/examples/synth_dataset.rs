//! Renders a short synthetic row and writes it as a stitchable folder.

use rowstitch::synth::{generate_scene, render_sequence, write_dataset, Texture, TrajectorySpec};

fn main() -> rowstitch::Result<()> {
    let traj = TrajectorySpec {
        seed: 21,
        n_frames: 30,
        ..TrajectorySpec::default()
    };
    let spec = traj.scene_for(21, Texture::BlobField);
    let scene = generate_scene(&spec)?;
    println!("scene {}x{}", scene.width(), scene.height());
    let seq = render_sequence(&scene, &traj)?;
    for k in [0, 1, 29] {
        let p = &seq.poses[k];
        println!("frame {k}: x {:.1} y {:.1} roll {:.3} deg scale {:.4}", p.x, p.y, p.roll_deg, p.scale);
    }
    let dir = std::env::temp_dir().join("rowstitch_synth");
    write_dataset(&dir, &seq)?;
    println!("wrote {} frames and sidecars to {}", seq.frames.len(), dir.display());
    Ok(())
}
