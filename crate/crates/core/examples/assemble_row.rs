//! Cuts a scene into three overlapping batches and reassembles them.

use rowstitch::assemble::assemble_row;
use rowstitch::batch::MosaicCanvas;
use rowstitch::model::PipelineConfig;
use rowstitch::synth::{generate_scene, SceneSpec};

fn main() -> rowstitch::Result<()> {
    let scene = generate_scene(&SceneSpec {
        seed: 2,
        row_length_px: 3600,
        row_height_px: 340,
        ..SceneSpec::default()
    })?;
    // Slight vertical jitter between batches.
    let parts: Vec<MosaicCanvas> = [(0, 20), (1100, 23), (2200, 17)]
        .iter()
        .map(|&(x, y)| MosaicCanvas::from_image(image::imageops::crop_imm(&scene, x, y, 1400, 300).to_image()))
        .collect();
    let row = assemble_row(&parts, &PipelineConfig::default())?;
    for (k, t) in row.offsets.iter().enumerate() {
        let d = t.translation_part();
        println!("batch {k}: offset ({:.1}, {:.1})", d.x, d.y);
    }
    println!("row mosaic {}x{}", row.canvas.width(), row.canvas.height());
    let path = std::env::temp_dir().join("rowstitch_row.png");
    row.canvas.pixels.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
