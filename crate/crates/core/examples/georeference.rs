//! Regression reports: geo fit of control points and a run-to-run comparison.

use rowstitch::georef::{compare_control_points, fit_axis_regression, ControlPoint};
use rowstitch::model::Point;

fn main() -> rowstitch::Result<()> {
    // 72 m row at 500 px/m; residuals of 100 px (20 cm) that the fit cannot absorb.
    let scale = 500.0;
    let pts: Vec<(f64, f64)> = [0.0, 24.0, 48.0, 72.0]
        .iter()
        .zip([100.0, 100.0, 100.0, -100.0])
        .map(|(w, r)| (*w, scale * w + r))
        .collect();
    print!("through origin\n{}", fit_axis_regression(&pts, false, None)?);

    let run_a: Vec<ControlPoint> = (0..15)
        .map(|i| ControlPoint {
            label: format!("stake_{i:02}"),
            pixel: Point::new(100.0 + 2400.0 * i as f64, 240.0),
            world: None,
        })
        .collect();
    let run_b: Vec<ControlPoint> = run_a
        .iter()
        .enumerate()
        .map(|(i, c)| ControlPoint {
            pixel: Point::new(c.pixel.x * 0.999 + if i % 2 == 0 { 6.0 } else { -6.0 }, c.pixel.y + 3.0),
            ..c.clone()
        })
        .collect();
    print!("run comparison\n{}", compare_control_points(&run_a, &run_b, Some(scale))?);
    Ok(())
}
