//! Deterministic SVG line plots from the artifact's CSV outputs.

use std::path::Path;

use super::CliError;

/// A parsed CSV: header row plus rows of string cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(CsvTable { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("csv has no column {name:?}")))
    }

    /// Parse one column as numbers; the error names the offending column.
    pub fn numeric_column(&self, index: usize) -> Result<Vec<f64>, CliError> {
        let name = &self.headers[index];
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row.get(index).map(String::as_str).unwrap_or("");
                cell.trim().parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "column {name:?} has non-numeric cell {cell:?} at data row {r}"
                    ))
                })
            })
            .collect()
    }

    /// Whether every cell of a column parses as a number.
    fn column_is_numeric(&self, index: usize) -> bool {
        self.rows
            .iter()
            .all(|row| row.get(index).is_some_and(|c| c.trim().parse::<f64>().is_ok()))
    }
}

/// Centered moving average; `window <= 1` is the identity. The window is
/// clamped at the ends so the output has the input's length.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 || values.is_empty() {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

const VIEW_W: f64 = 800.0;
const VIEW_H: f64 = 500.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Render line series over a shared x column as a fixed-viewBox SVG with
/// one polyline per series, axis labels, and a legend.
pub fn render_svg(
    x_label: &str,
    xs: &[f64],
    series: &[(String, Vec<f64>)],
    window: usize,
) -> String {
    let smoothed: Vec<(String, Vec<f64>)> = series
        .iter()
        .map(|(name, ys)| (name.clone(), moving_average(ys, window)))
        .collect();

    let (x_min, x_max) = span(xs);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, ys) in &smoothed {
        let (lo, hi) = span(ys);
        y_min = y_min.min(lo);
        y_max = y_max.max(hi);
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = 0.05 * (y_max - y_min).max(1e-12);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = VIEW_W - MARGIN_L - MARGIN_R;
    let plot_h = VIEW_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-300) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min).max(1e-300)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEW_W} {VIEW_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        b = VIEW_H - MARGIN_B,
        r = VIEW_W - MARGIN_R
    ));
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        t = MARGIN_T,
        b = VIEW_H - MARGIN_B
    ));
    // Axis labels and extreme ticks.
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"14\" text-anchor=\"middle\">{label}</text>\n",
        x = MARGIN_L + plot_w / 2.0,
        y = VIEW_H - 10.0,
        label = escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
        x = MARGIN_L,
        y = VIEW_H - MARGIN_B + 16.0,
        v = tick(x_min)
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
        x = VIEW_W - MARGIN_R,
        y = VIEW_H - MARGIN_B + 16.0,
        v = tick(x_max)
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\">{v}</text>\n",
        x = MARGIN_L - 6.0,
        y = VIEW_H - MARGIN_B,
        v = tick(y_min + pad)
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\">{v}</text>\n",
        x = MARGIN_L - 6.0,
        y = MARGIN_T + 8.0,
        v = tick(y_max - pad)
    ));

    for (s, (name, ys)) in smoothed.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            x = VIEW_W - MARGIN_R - 150.0,
            y = MARGIN_T + 16.0 * (s as f64 + 1.0),
            name = escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Build the plot from a CSV: `x_column` (default: first column) on the
/// horizontal axis, `series` columns (default: every other numeric column)
/// as polylines.
pub fn report_from_csv(
    table: &CsvTable,
    x_column: Option<&str>,
    series_columns: Option<&[String]>,
    window: usize,
) -> Result<String, CliError> {
    if table.headers.is_empty() {
        return Err(CliError::Data("csv has no header row".into()));
    }
    let x_idx = match x_column {
        Some(name) => table.column_index(name)?,
        None => 0,
    };
    let xs = table.numeric_column(x_idx)?;

    let series_indices: Vec<usize> = match series_columns {
        Some(names) => names
            .iter()
            .map(|n| table.column_index(n))
            .collect::<Result<Vec<_>, _>>()?,
        None => (0..table.headers.len())
            .filter(|&i| i != x_idx && table.column_is_numeric(i))
            .collect(),
    };
    if series_indices.is_empty() {
        return Err(CliError::Data("no numeric series columns to plot".into()));
    }
    let mut series = Vec::with_capacity(series_indices.len());
    for idx in series_indices {
        series.push((table.headers[idx].clone(), table.numeric_column(idx)?));
    }
    Ok(render_svg(&table.headers[x_idx], &xs, &series, window))
}

fn span(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo == hi {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
