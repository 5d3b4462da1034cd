use std::path::Path;

use plotters::prelude::*;

use crate::commands::experiment::CellResult;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// γ against the sweep value, one line per replicate.
pub fn sweep_plot(
    path: &Path,
    axis: &str,
    cells: &[CellResult],
    replicates: usize,
) -> Result<(), Box<dyn std::error::Error>> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| c.gamma.map(|g| (c.value, g)))
        .filter(|(x, g)| x.is_finite() && g.is_finite())
        .collect();
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let (x0, x1) = bounds(pts.iter().map(|p| p.0), 1.0);
    let (_, y1) = bounds(pts.iter().map(|p| p.1), 1.0);
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, 0.0..y1 * 1.1)?;
    chart.configure_mesh().x_desc(axis).y_desc("gamma").draw()?;
    for k in 0..replicates {
        let color = PALETTE[k % PALETTE.len()];
        let series: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.replicate == k)
            .filter_map(|c| c.gamma.map(|g| (c.value, g)))
            .collect();
        chart
            .draw_series(LineSeries::new(series.clone(), color.stroke_width(2)))?
            .label(format!("seed {k}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart.draw_series(
            series
                .into_iter()
                .map(|p| Circle::new(p, 3, color.filled())),
        )?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>, fallback: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        return (0.0, fallback);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5 * fallback, hi + 0.5 * fallback)
    }
}
