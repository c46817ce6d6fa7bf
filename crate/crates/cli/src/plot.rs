//! Self-contained SVG line charts rendered straight from a trace CSV, so
//! every plot can be regenerated from `trace.csv` alone.

use std::fmt::Write as _;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Parsed trace: header names and one optional value per cell.
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl TraceTable {
    pub fn parse(csv: &str) -> Result<Self, String> {
        let mut lines = csv.lines();
        let header = lines.next().ok_or("empty trace file")?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<Option<f64>> = line
                .split(',')
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|e| format!("row {}: bad number `{c}`: {e}", i + 2))
                    }
                })
                .collect::<Result<_, String>>()?;
            if cells.len() != columns.len() {
                return Err(format!(
                    "row {}: {} cells, header has {}",
                    i + 2,
                    cells.len(),
                    columns.len()
                ));
            }
            rows.push(cells);
        }
        Ok(Self { columns, rows })
    }

    /// Indices of columns whose name starts with the prefix.
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }

    /// (k, value) points of one column, skipping empty cells.
    pub fn series(&self, col: usize) -> Vec<(f64, f64)> {
        let k_col = 0;
        self.rows
            .iter()
            .filter_map(|row| match (row[k_col], row[col]) {
                (Some(k), Some(v)) => Some((k, v)),
                _ => None,
            })
            .collect()
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders named series as one SVG chart.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    // Frame and grid lines at the quartiles.
    let _ = write!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333" stroke-width="1"/>"##
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let gx = MARGIN_L + frac * plot_w;
        let gy = MARGIN_T + frac * plot_h;
        if i > 0 && i < 4 {
            let _ = write!(
                svg,
                r##"<line x1="{gx}" y1="{MARGIN_T}" x2="{gx}" y2="{}" stroke="#ddd" stroke-width="0.5"/>"##,
                MARGIN_T + plot_h
            );
            let _ = write!(
                svg,
                r##"<line x1="{MARGIN_L}" y1="{gy}" x2="{}" y2="{gy}" stroke="#ddd" stroke-width="0.5"/>"##,
                MARGIN_L + plot_w
            );
        }
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_max - frac * (y_max - y_min);
        let _ = write!(
            svg,
            r#"<text x="{gx}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h + 18.0,
            fmt_tick(xv)
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            gy + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">k</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    );

    for (idx, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = write!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        // Legend entry.
        let lx = MARGIN_L + 10.0 + 140.0 * (idx % 5) as f64;
        let ly = MARGIN_T + 14.0 + 16.0 * (idx / 5) as f64;
        let _ = write!(
            svg,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 22.0,
            name
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Chart of all columns matching one prefix.
pub fn chart_from_prefix(table: &TraceTable, title: &str, prefixes: &[&str]) -> String {
    let mut series = Vec::new();
    for prefix in prefixes {
        for col in table.columns_with_prefix(prefix) {
            series.push((table.columns[col].clone(), table.series(col)));
        }
    }
    line_chart(title, &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_plots_a_tiny_trace() {
        let csv = "k,y_1,yref_1,u_1,e_1,phi_1_1\n1,0,1,0.5,1,\n2,0.9,1,0.6,0.1,1.25\n";
        let table = TraceTable::parse(csv).unwrap();
        assert_eq!(table.columns.len(), 6);
        assert_eq!(table.series(5), vec![(2.0, 1.25)]);
        let svg = chart_from_prefix(&table, "tracking", &["y_", "yref_"]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>"));
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(TraceTable::parse("k,y\n1\n").is_err());
        assert!(TraceTable::parse("k,y\n1,abc\n").is_err());
    }
}
