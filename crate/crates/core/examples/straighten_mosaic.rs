//! Straightens a canvas whose valid band wanders like a curved row.

use image::{GrayImage, Luma};
use rowstitch::batch::MosaicCanvas;
use rowstitch::straighten::{extract_midline, segment_midline, straighten, DEFAULT_SMOOTH_WINDOW};
use rowstitch::synth::{generate_scene, SceneSpec};

fn main() -> rowstitch::Result<()> {
    let (w, h, band) = (1600u32, 400u32, 220u32);
    let pixels = generate_scene(&SceneSpec {
        seed: 8,
        row_length_px: w,
        row_height_px: h,
        ..SceneSpec::default()
    })?;
    let top = |x: u32| 90.0 + 60.0 * (x as f64 / 260.0).sin();
    let mask = GrayImage::from_fn(w, h, |x, y| {
        let t = top(x);
        Luma([if (y as f64) >= t && (y as f64) < t + band as f64 { 255 } else { 0 }])
    });
    let canvas = MosaicCanvas {
        pixels,
        mask,
        origin_offset: (0.0, 0.0),
        footprints: Vec::new(),
    };

    let m = extract_midline(&canvas, DEFAULT_SMOOTH_WINDOW)?;
    let bps = segment_midline(&m, 5.0);
    println!("{} breakpoints: {:?}", bps.len(), bps);
    let (out, rect) = straighten(&canvas, 5.0, DEFAULT_SMOOTH_WINDOW, None)?;
    println!("straightened to {}x{} with {} slices", out.width(), out.height(), rect.slices.len());
    let p = rect.map_point(&rowstitch::model::Point::new(800.0, top(800) + band as f64 / 2.0));
    println!("mid-band point at x=800 lands at ({:.1}, {:.1})", p.x, p.y);
    let path = std::env::temp_dir().join("rowstitch_straight.png");
    out.pixels.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
