//! Render experiment CSV output into a markdown report and simple SVG
//! charts (hand-rolled; no plotting dependency).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty csv"))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok(CsvTable { header, rows })
}

fn markdown_table(t: &CsvTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", t.header.join(" | ")));
    out.push_str(&format!(
        "|{}\n",
        t.header.iter().map(|_| " --- |").collect::<String>()
    ));
    for r in &t.rows {
        out.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    out
}

/// Grouped bar chart of one numeric column, grouped by (method, pattern).
pub fn bar_chart_svg(
    labels: &[String],
    values: &[f64],
    errors: &[f64],
    title: &str,
    y_label: &str,
) -> String {
    let width = 120 + labels.len() * 90;
    let height = 380;
    let plot_h = 260.0;
    let base_y = 320.0;
    let max_v = values
        .iter()
        .zip(errors.iter())
        .map(|(v, e)| v + e)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        width / 2
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"190\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 190)\">{y_label}</text>\n"
    ));
    s.push_str(&format!(
        "<line x1=\"60\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" stroke=\"black\"/>\n",
        width - 20
    ));
    // y axis ticks
    for t in 0..=4 {
        let v = max_v * t as f64 / 4.0;
        let y = base_y - plot_h * t as f64 / 4.0;
        s.push_str(&format!(
            "<line x1=\"55\" y1=\"{y:.1}\" x2=\"60\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
             <text x=\"50\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{v:.1}</text>\n",
            y + 3.0
        ));
    }
    let palette = ["#4878cf", "#e24a33", "#6acc65", "#956cb4", "#c4ad66", "#77bedb"];
    for (i, ((label, v), e)) in labels.iter().zip(values).zip(errors).enumerate() {
        let x = 70.0 + i as f64 * 90.0;
        let h = plot_h * v / max_v;
        let y = base_y - h;
        let color = palette[i % palette.len()];
        s.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"60\" height=\"{h:.1}\" fill=\"{color}\"/>\n"
        ));
        if *e > 0.0 {
            let eh = plot_h * e / max_v;
            let cx = x + 30.0;
            s.push_str(&format!(
                "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                y - eh,
                y + eh
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{label}</text>\n",
            x + 30.0,
            base_y + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{v:.2}</text>\n",
            x + 30.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Multi-series line chart (used for training loss curves).
pub fn line_chart_svg(series: &[(String, Vec<f64>)], title: &str, y_label: &str) -> String {
    let width = 640;
    let height = 380;
    let plot_w = 540.0;
    let plot_h = 280.0;
    let x0 = 70.0;
    let base_y = 330.0;
    let max_len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);
    let max_v = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let palette = ["#4878cf", "#e24a33", "#6acc65", "#956cb4"];
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        width / 2
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"190\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 190)\">{y_label}</text>\n"
    ));
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{base_y}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n",
        x0 + plot_w,
        base_y - plot_h
    ));
    for (si, (name, vals)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = x0 + plot_w * i as f64 / (max_len - 1) as f64;
                let y = base_y - plot_h * v / max_v;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{name}</text>\n",
            x0 + plot_w - 80.0,
            40.0 + 14.0 * si as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Build `report.md` plus SVG charts from an experiment output directory.
pub fn render_report(metrics_dir: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary = read_csv(&metrics_dir.join("summary.csv"))?;
    let mut md = String::from("# Reconstruction comparison\n\n## Summary (mean over test slices)\n\n");
    md.push_str(&markdown_table(&summary));

    // nRMSE bar chart from the summary table.
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for r in &summary.rows {
        labels.push(format!("{} {}", r[0], r[1]));
        values.push(r[2].parse::<f64>().unwrap_or(f64::NAN));
        errors.push(r[3].parse::<f64>().unwrap_or(0.0));
    }
    let svg = bar_chart_svg(&labels, &values, &errors, "nRMSE by method and pattern", "nRMSE (%)");
    let svg_path = out_dir.join("nrmse.svg");
    std::fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
    md.push_str("\n![nRMSE](nrmse.svg)\n");

    // Optional loss curves from training checkpoints next to the metrics.
    let mut series = Vec::new();
    for tag in ["cnn-fix", "cnn-aug"] {
        let path = metrics_dir.join(format!("train-{tag}")).join("loss_history.csv");
        if let Ok(table) = read_csv(&path) {
            let idx = table.header.iter().position(|h| h == "loss1");
            if let Some(idx) = idx {
                let vals: Vec<f64> = table
                    .rows
                    .iter()
                    .filter_map(|r| r.get(idx).and_then(|v| v.parse().ok()))
                    .collect();
                if !vals.is_empty() {
                    series.push((tag.to_string(), vals));
                }
            }
        }
    }
    if !series.is_empty() {
        let svg = line_chart_svg(&series, "Training pixel loss", "loss1");
        let svg_path = out_dir.join("loss_curves.svg");
        std::fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
        md.push_str("\n![training loss](loss_curves.svg)\n");
    }

    if let Ok(per_slice) = read_csv(&metrics_dir.join("metrics.csv")) {
        md.push_str("\n## Per-slice metrics\n\n");
        md.push_str(&markdown_table(&per_slice));
    }

    let md_path = out_dir.join("report.md");
    std::fs::write(&md_path, md).map_err(|e| Error::io(&md_path, e))
}
