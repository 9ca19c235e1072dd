//! SVG rendering of reports and transcripts.

use std::path::Path;

use anyhow::{Context, Result};
use plotters::prelude::*;
use serde_json::Value;

use crate::Invalid;

/// Attack reports become a margin-per-point scatter coloured by verdict;
/// learn transcripts (JSON lines) become a localizer-size curve.
pub fn plot(input: &Path, out: &Path) -> Result<u8> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    if let Ok(v) = serde_json::from_str::<Value>(&text) {
        return match v.get("schema").and_then(Value::as_str) {
            Some(s) if s.starts_with("attack-report/") => attack_scatter(&v, out),
            Some(s) if s.starts_with("bench-report/") => bench_bars(&v, out),
            _ => Err(Invalid("plot understands attack and bench reports and learn transcripts".into()).into()),
        };
    }
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v: Value = serde_json::from_str(line).map_err(|e| Invalid(format!("line {}: {e}", i + 1)))?;
        let it = v.get("iteration").and_then(Value::as_f64);
        let size = v.get("size").and_then(Value::as_f64);
        match (it, size) {
            (Some(a), Some(b)) if b > 0.0 => pts.push((a, b.log10())),
            _ => return Err(Invalid(format!("line {}: not a transcript entry", i + 1)).into()),
        }
    }
    transcript_curve(&pts, out)
}

fn bounds(vals: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn attack_scatter(v: &Value, out: &Path) -> Result<u8> {
    let mut pts = Vec::new();
    for e in v["entries"].as_array().into_iter().flatten() {
        let (Some(i), Some(o)) = (e["index"].as_f64(), e.get("outcome").filter(|o| !o.is_null())) else { continue };
        let margin = o["margin"].as_f64().unwrap_or(0.0);
        pts.push((i, margin, o["verdict"].as_str().unwrap_or("unknown").to_string()));
    }
    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let (ylo, yhi) = bounds(pts.iter().map(|p| p.1));
    let mut chart = ChartBuilder::on(&root)
        .caption("flip margin per point", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5..(pts.len().max(1) as f64 - 0.5), ylo..yhi)?;
    chart.configure_mesh().x_desc("point").y_desc("margin").draw()?;
    for (verdict, color) in [("found", RED), ("certified", BLUE), ("unknown", BLACK)] {
        chart
            .draw_series(pts.iter().filter(|p| p.2 == verdict).map(|p| Circle::new((p.0, p.1), 3, color.filled())))?
            .label(verdict)
            .legend(move |(x, y)| Circle::new((x, y), 3, color.filled()));
    }
    chart.configure_series_labels().border_style(BLACK).draw()?;
    root.present()?;
    Ok(0)
}

fn bench_bars(v: &Value, out: &Path) -> Result<u8> {
    let rows: Vec<(String, f64, f64)> = v["rows"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| (format!("{}x{}", r["n"], r["k"]), r["sdp_found"].as_f64().unwrap_or(0.0), r["pgd_found"].as_f64().unwrap_or(0.0)))
        .collect();
    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let top = rows.iter().map(|r| r.1.max(r.2)).fold(1.0, f64::max) * 1.1;
    let mut chart = ChartBuilder::on(&root)
        .caption("attacks found per cell", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..rows.len().max(1) as f64, 0.0..top)?;
    chart.configure_mesh().disable_x_mesh().x_labels(0).y_desc("found").draw()?;
    for (i, (label, sdp, pgd)) in rows.iter().enumerate() {
        let x = i as f64;
        chart.draw_series([Rectangle::new([(x + 0.1, 0.0), (x + 0.45, *sdp)], RED.filled())])?;
        chart.draw_series([Rectangle::new([(x + 0.55, 0.0), (x + 0.9, *pgd)], BLUE.filled())])?;
        chart.draw_series([Text::new(label.clone(), (x + 0.4, top * 0.97), ("sans-serif", 14))])?;
    }
    root.present()?;
    Ok(0)
}

fn transcript_curve(pts: &[(f64, f64)], out: &Path) -> Result<u8> {
    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let (xlo, xhi) = bounds(pts.iter().map(|p| p.0));
    let (ylo, yhi) = bounds(pts.iter().map(|p| p.1));
    let mut chart = ChartBuilder::on(&root)
        .caption("localizer size", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(xlo..xhi, ylo..yhi)?;
    chart.configure_mesh().x_desc("iteration").y_desc("log10 size").draw()?;
    chart.draw_series(LineSeries::new(pts.iter().copied(), &BLUE))?;
    root.present()?;
    Ok(0)
}
