//! Static SVG panels of sweep results, one line per series.

use std::path::Path;

use anyhow::{anyhow, Context};
use levent_core::{Error, SweepRow};
use plotters::prelude::*;

pub const DEFAULT_PANELS: &[&str] = &["log_negativity", "epr_variance", "nrf", "purity"];

const PANEL_WIDTH: u32 = 520;
const PANEL_HEIGHT: u32 = 380;

/// Columns that a panel can show.
fn column(name: &str) -> Option<fn(&SweepRow) -> Option<f64>> {
    Some(match name {
        "log_negativity" => |r| r.log_negativity,
        "nu_min" => |r| r.nu_min,
        "epr_variance" => |r| r.epr_variance,
        "nrf" => |r| r.nrf,
        "purity" => |r| r.purity,
        "mean_n1" => |r| r.mean_n1,
        "mean_n2" => |r| r.mean_n2,
        _ => return None,
    })
}

fn label(name: &str) -> &str {
    match name {
        "log_negativity" => "E_N",
        "nu_min" => "ν̃₋",
        "epr_variance" => "Δ_EPR",
        "nrf" => "NRF",
        "purity" => "purity",
        "mean_n1" => "⟨n₁⟩",
        "mean_n2" => "⟨n₂⟩",
        other => other,
    }
}

/// The EPR variance and NRF panels carry the classical bound at 1.
fn has_unity_line(name: &str) -> bool {
    matches!(name, "epr_variance" | "nrf")
}

/// Quantities that span decades get a log₁₀ axis.
fn log_axis(values: impl Iterator<Item = f64> + Clone, name: &str) -> bool {
    let positive = values.clone().all(|v| v > 0.0);
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let wide = matches!(
        name,
        "epr_variance" | "nrf" | "mean_n1" | "mean_n2" | "g_ratio" | "q" | "n"
    );
    positive && wide && hi / lo > 100.0
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 {
        0.05 * span
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

/// Rows grouped by series, in order of first appearance.
fn series(rows: &[SweepRow]) -> Vec<(&str, Vec<&SweepRow>)> {
    let mut out: Vec<(&str, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(s, _)| *s == r.series) {
            Some((_, v)) => v.push(r),
            None => out.push((&r.series, vec![r])),
        }
    }
    out
}

/// Contiguous runs of defined values; unstable or failed rows break a line.
fn segments(
    rows: &[&SweepRow],
    get: fn(&SweepRow) -> Option<f64>,
    fx: impl Fn(f64) -> f64,
    fy: impl Fn(f64) -> f64,
) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for r in rows {
        match get(r) {
            Some(y) if y.is_finite() => out.last_mut().unwrap().push((fx(r.value), fy(y))),
            _ => {
                if !out.last().unwrap().is_empty() {
                    out.push(Vec::new());
                }
            }
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

pub fn plot_rows(rows: &[SweepRow], panels: &[&str], path: &Path) -> anyhow::Result<()> {
    if rows.is_empty() {
        return Err(Error::Parse("no rows to plot".into()).into());
    }
    let getters = panels
        .iter()
        .map(|p| column(p).ok_or_else(|| Error::Config(format!("unknown plot column `{p}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let parameter = rows[0].parameter.as_str();
    let log_x = log_axis(rows.iter().map(|r| r.value), parameter);
    let fx = move |x: f64| if log_x { x.log10() } else { x };
    let x_label = if log_x {
        format!("log₁₀ {parameter}")
    } else {
        parameter.to_string()
    };
    let (x0, x1) = rows
        .iter()
        .map(|r| fx(r.value))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x0, x1) = padded(x0, x1);
    let groups = series(rows);

    let cols = if panels.len() > 1 { 2 } else { 1 };
    let nrows = panels.len().div_ceil(cols);
    let size = (PANEL_WIDTH * cols as u32, PANEL_HEIGHT * nrows as u32);
    let root = SVGBackend::new(path, size).into_drawing_area();
    let draw = || -> Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let areas = root.split_evenly((nrows, cols));
        for ((name, get), area) in panels.iter().zip(&getters).zip(&areas) {
            let values = rows.iter().filter_map(get).filter(|v| v.is_finite());
            let log_y = log_axis(values.clone(), name);
            let fy = move |y: f64| if log_y { y.log10() } else { y };
            let (mut y0, mut y1) = values
                .map(fy)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            if has_unity_line(name) {
                y0 = y0.min(fy(1.0));
                y1 = y1.max(fy(1.0));
            }
            let (y0, y1) = padded(y0, y1);
            let y_label = if log_y {
                format!("log₁₀ {}", label(name))
            } else {
                label(name).to_string()
            };
            let mut chart = ChartBuilder::on(area)
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d(x0..x1, y0..y1)?;
            chart
                .configure_mesh()
                .disable_mesh()
                .x_desc(x_label.as_str())
                .y_desc(y_label.as_str())
                .draw()?;
            if has_unity_line(name) {
                chart.draw_series(LineSeries::new([(x0, fy(1.0)), (x1, fy(1.0))], BLACK))?;
            }
            for (k, (label, group)) in groups.iter().enumerate() {
                let color = Palette99::pick(k).to_rgba();
                let parts = segments(group, *get, fx, fy);
                let single = rows.len() == 1;
                let mut first = true;
                for part in parts {
                    let style = color.stroke_width(2);
                    let series = if single || part.len() == 1 {
                        chart.draw_series(part.iter().map(|&p| Circle::new(p, 4, style.filled())))?
                    } else {
                        chart.draw_series(LineSeries::new(part, style))?
                    };
                    if first {
                        series
                            .label(*label)
                            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
                        first = false;
                    }
                }
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()?;
        }
        root.present()?;
        Ok(())
    };
    draw()
        .map_err(|e| anyhow!("{e}"))
        .with_context(|| format!("drawing {}", path.display()))
}
