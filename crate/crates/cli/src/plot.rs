//! SVG views of the CSV outputs.

use std::path::Path;

use plotters::prelude::*;

pub type PlotResult = Result<(), String>;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-12 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// One labelled curve per series, `log10` of the ordinate.
pub fn log_curves(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> PlotResult {
    let logged: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, pts)| (name.clone(), pts.iter().filter(|(_, y)| *y > 0.0).map(|(x, y)| (*x, y.log10())).collect()))
        .collect();
    let (x0, x1) = bounds(logged.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y0, y1) = bounds(logged.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc(x_label).y_desc(format!("log10 {y_label}")).draw().map_err(err)?;
    for (i, (name, pts)) in logged.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(err)?;
    root.present().map_err(err)
}

/// Eigenvalues in the complex plane: filled dots when resolved, crosses otherwise.
pub fn spectrum(path: &Path, title: &str, omega0: f64, points: &[(f64, f64, bool)]) -> PlotResult {
    // The far-left tail of the discrete spectrum is uninformative.
    let shown: Vec<&(f64, f64, bool)> = points.iter().filter(|(re, _, _)| *re > omega0 - 6.0).collect();
    let (x0, x1) = bounds(shown.iter().map(|p| p.0).chain([omega0, 1.0]));
    let (y0, y1) = bounds(shown.iter().map(|p| p.1).chain([-1.0, 1.0]));
    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc("Re lambda").y_desc("Im lambda").draw().map_err(err)?;
    chart
        .draw_series(LineSeries::new([(omega0, y0), (omega0, y1)], BLACK.mix(0.5)))
        .map_err(err)?
        .label("omega0")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK.mix(0.5)));
    chart
        .draw_series(shown.iter().filter(|p| p.2).map(|p| Circle::new((p.0, p.1), 4, BLUE.filled())))
        .map_err(err)?
        .label("resolved")
        .legend(|(x, y)| Circle::new((x + 10, y), 4, BLUE.filled()));
    chart
        .draw_series(shown.iter().filter(|p| !p.2).map(|p| Cross::new((p.0, p.1), 4, RED.stroke_width(1))))
        .map_err(err)?
        .label("unresolved")
        .legend(|(x, y)| Cross::new((x + 10, y), 4, RED.stroke_width(1)));
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(err)?;
    root.present().map_err(err)
}
