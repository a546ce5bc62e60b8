use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::runner::{DesignedPattern, RunOutput};
use super::{ExperimentKind, ExperimentSpec, PilotDesign, ResultRow};
use crate::error::{Error, Result};
use crate::ici::PilotPattern;
use crate::pilot::TraceEntry;

pub const CSV_HEADER: &str =
    "experiment,snr_db,position_m,antenna_id,estimator,pilot_design,trials,metric_name,metric_value,seed";

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Io(e.into()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// One pilot index per line.
pub fn write_pattern<W: Write>(pattern: &PilotPattern, mut out: W) -> Result<()> {
    for idx in pattern.indices() {
        writeln!(out, "{idx}")?;
    }
    Ok(())
}

/// `m,mu,accepted` log of the low-coherence search.
pub fn write_trace<W: Write>(trace: &[TraceEntry], mut out: W) -> Result<()> {
    writeln!(out, "m,mu,accepted")?;
    for t in trace {
        writeln!(out, "{},{},{}", t.m, t.mu, u8::from(t.accepted))?;
    }
    Ok(())
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

/// Line chart of the rows, log-scale y. Returns false when nothing is plottable.
pub fn write_svg(kind: ExperimentKind, rows: &[ResultRow], path: &Path) -> Result<bool> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let by_position = matches!(kind, ExperimentKind::PositionSweep | ExperimentKind::IciCompare);
    for r in rows {
        if r.estimator == "none" {
            continue;
        }
        let x = if by_position { r.position_m } else { r.snr_db };
        let Some(x) = x else { continue };
        let mut key = format!("{}-{}", r.estimator, r.pilot_design);
        if r.antenna_id > 0 && kind == ExperimentKind::MseSweep {
            key.push_str(&format!(" ant{}", r.antenna_id));
        }
        if kind != ExperimentKind::MseSweep {
            key.push_str(&format!(" {}", r.metric_name));
        }
        if kind == ExperimentKind::PositionSweep {
            if let Some(s) = r.snr_db {
                key.push_str(&format!(" {s}dB"));
            }
        }
        series.entry(key).or_default().push((x, r.metric_value.max(1e-30)));
    }
    if series.is_empty() {
        return Ok(false);
    }
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 * 10.0;
    }

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let metric = rows.first().map_or("", |r| r.metric_name.as_str());
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{kind}"), ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, (y0 * 0.8..y1 * 1.25).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(if by_position { "position (m)" } else { "SNR (dB)" })
        .y_desc(metric)
        .draw()
        .map_err(plot_err)?;
    for (i, (name, mut points)) in series.into_iter().enumerate() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = Palette99::pick(i).stroke_width(2);
        chart
            .draw_series(LineSeries::new(points, color))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], Palette99::pick(i)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(true)
}

fn preferred_design(designs: &[DesignedPattern]) -> Option<&DesignedPattern> {
    designs
        .iter()
        .find(|d| d.design == PilotDesign::Alg1)
        .or_else(|| designs.first())
}

/// Writes `results.csv`, `run.json`, `pattern.txt`, the search trace for
/// `design-pilot`, and optionally an SVG chart. Returns the written paths.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, output: &RunOutput, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join("results.csv");
    write_csv(&output.rows, fs::File::create(&csv_path)?)?;
    written.push(csv_path);

    let json_path = dir.join("run.json");
    fs::write(&json_path, serde_json::to_string_pretty(spec)?)?;
    written.push(json_path);

    if let Some(dp) = preferred_design(&output.designs) {
        let path = dir.join("pattern.txt");
        write_pattern(&dp.pattern, fs::File::create(&path)?)?;
        written.push(path);
        if spec.kind == ExperimentKind::DesignPilot && !dp.trace.is_empty() {
            let path = dir.join("design_trace.csv");
            write_trace(&dp.trace, fs::File::create(&path)?)?;
            written.push(path);
        }
    }

    if svg && spec.kind != ExperimentKind::DesignPilot {
        let path = dir.join(format!("{}.svg", spec.kind.label()));
        if write_svg(spec.kind, &output.rows, &path)? {
            written.push(path);
        }
    }
    Ok(written)
}
