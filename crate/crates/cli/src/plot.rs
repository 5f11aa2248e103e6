use std::path::Path;

use plotters::prelude::*;

use crate::error::{fatal, CliResult};

const COLORS: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

/// Line chart of held-out accuracy against training step, one series per arm.
pub fn accuracy_chart(series: &[(String, Vec<(f64, f64)>)], out: &Path) -> CliResult<()> {
    let max_step = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .fold(1.0f64, f64::max);
    let root = SVGBackend::new(out, (720, 440)).into_drawing_area();
    root.fill(&WHITE).map_err(fatal)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Held-out accuracy (clean labels)", ("sans-serif", 20))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..max_step, 0.0..1.0)
        .map_err(fatal)?;
    chart
        .configure_mesh()
        .x_desc("training step")
        .y_desc("accuracy")
        .draw()
        .map_err(fatal)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(fatal)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(fatal)?;
    root.present().map_err(fatal)?;
    Ok(())
}
