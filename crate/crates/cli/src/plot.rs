//! Self-contained SVG renderings of run artifacts: output/coefficient time
//! series and certificate traces with sign-based coloring.

use std::path::{Path, PathBuf};

use crate::CliError;

const WIDTH: f64 = 900.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_V: f64 = 35.0;

struct Panel {
    title: String,
    /// Named series: (label, points, stroke color).
    lines: Vec<(String, Vec<(f64, f64)>, &'static str)>,
    /// Scatter points colored by sign (green > 0, red <= 0).
    signed: Option<Vec<(f64, f64)>>,
}

fn finite_bounds(panel: &Panel) -> Option<(f64, f64, f64, f64)> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts, _) in &panel.lines {
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if let Some(pts) = &panel.signed {
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if xs.is_empty() {
        return None;
    }
    let (xmin, xmax) = xs.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let (ymin, ymax) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let pad = ((ymax - ymin) * 0.05).max(1e-12);
    Some((xmin, xmax.max(xmin + 1e-12), ymin - pad, ymax + pad))
}

fn render(panels: &[Panel]) -> String {
    let total_h = panels.len() as f64 * (PANEL_H + MARGIN_V) + MARGIN_V;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{total_h}\" \
         viewBox=\"0 0 {WIDTH} {total_h}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (idx, panel) in panels.iter().enumerate() {
        let top = MARGIN_V + idx as f64 * (PANEL_H + MARGIN_V);
        let Some((xmin, xmax, ymin, ymax)) = finite_bounds(panel) else {
            continue;
        };
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let sx = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin) * plot_w;
        let sy = |y: f64| top + PANEL_H - (y - ymin) / (ymax - ymin) * PANEL_H;
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{top}\" width=\"{plot_w}\" height=\"{PANEL_H}\" \
             fill=\"none\" stroke=\"#999\"/>\n\
             <text x=\"{MARGIN_L}\" y=\"{}\" fill=\"#333\">{}</text>\n",
            top - 8.0,
            panel.title
        ));
        // Zero line when in range.
        if ymin < 0.0 && ymax > 0.0 {
            let y0 = sy(0.0);
            svg.push_str(&format!(
                "<line x1=\"{MARGIN_L}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" \
                 stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n",
                MARGIN_L + plot_w
            ));
        }
        // Axis labels.
        svg.push_str(&format!(
            "<text x=\"5\" y=\"{}\" fill=\"#333\">{ymax:.3e}</text>\n\
             <text x=\"5\" y=\"{}\" fill=\"#333\">{ymin:.3e}</text>\n",
            top + 12.0,
            top + PANEL_H - 2.0
        ));
        for (_, pts, color) in &panel.lines {
            let coords: Vec<String> = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if coords.len() > 1 {
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                     stroke-width=\"1\"/>\n",
                    coords.join(" ")
                ));
            }
        }
        if let Some(pts) = &panel.signed {
            for &(x, y) in pts {
                if !(x.is_finite() && y.is_finite()) {
                    continue;
                }
                let color = if y > 0.0 { "#2a7d2a" } else { "#c22" };
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Io(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    Ok(Table { header, rows })
}

impl Table {
    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// (k, value) pairs for a column, skipping empty cells.
    fn series(&self, name: &str) -> Vec<(f64, f64)> {
        let Some(kcol) = self.col("k") else {
            return Vec::new();
        };
        let Some(vcol) = self.col(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| {
                let k: f64 = r.get(kcol)?.parse().ok()?;
                let cell = r.get(vcol)?;
                if cell.is_empty() {
                    return None;
                }
                let v: f64 = cell.parse().ok()?;
                Some((k, v))
            })
            .collect()
    }
}

/// Renders `timeseries.svg` and `certificates.svg` from `run.csv` in the
/// artifacts directory. Returns the written paths; an empty table writes
/// nothing and reports zero files.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let table = read_table(&dir.join("run.csv"))?;
    if table.rows.is_empty() {
        eprintln!("warning: empty table, no plots emitted");
        return Ok(Vec::new());
    }
    let mut written = Vec::new();

    let palette = [
        "#1f5fa8", "#c26a1f", "#2a7d2a", "#8a2a8a", "#777", "#b0a020", "#20a0a0", "#a02020",
        "#5050d0", "#508050", "#905030", "#303030", "#d06090", "#60a0d0", "#a0d060", "#d0a060",
        "#6060a0", "#a06060", "#60a060", "#404080",
    ];
    let mut theta_lines = Vec::new();
    for (i, name) in table
        .header
        .iter()
        .filter(|h| h.starts_with("theta_"))
        .enumerate()
    {
        theta_lines.push((
            name.clone(),
            table.series(name),
            palette[i % palette.len()],
        ));
    }
    let ts = vec![
        Panel {
            title: "output y vs k".into(),
            lines: vec![("y".into(), table.series("y"), "#1f5fa8")],
            signed: None,
        },
        Panel {
            title: "control u vs k".into(),
            lines: vec![("u".into(), table.series("u"), "#c26a1f")],
            signed: None,
        },
        Panel {
            title: "model coefficients vs k".into(),
            lines: theta_lines,
            signed: None,
        },
    ];
    let ts_path = dir.join("timeseries.svg");
    std::fs::write(&ts_path, render(&ts))
        .map_err(|e| CliError::Io(format!("writing {}: {e}", ts_path.display())))?;
    written.push(ts_path);

    let one_minus = |s: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        s.into_iter().map(|(k, v)| (k, 1.0 - v)).collect()
    };
    let certs = vec![
        Panel {
            title: "circle: 1 - alpha vs k (green passes)".into(),
            lines: Vec::new(),
            signed: Some(one_minus(table.series("alpha_cc"))),
        },
        Panel {
            title: "circle: beta vs k (green passes)".into(),
            lines: Vec::new(),
            signed: Some(table.series("beta_cc")),
        },
        Panel {
            title: "tsypkin: 1 - alpha vs k (green passes)".into(),
            lines: Vec::new(),
            signed: Some(one_minus(table.series("alpha_tc"))),
        },
        Panel {
            title: "tsypkin: beta vs k (green passes)".into(),
            lines: Vec::new(),
            signed: Some(table.series("beta_tc")),
        },
    ];
    if certs.iter().any(|p| {
        p.signed
            .as_ref()
            .is_some_and(|s| !s.is_empty())
    }) {
        let cert_path = dir.join("certificates.svg");
        std::fs::write(&cert_path, render(&certs))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", cert_path.display())))?;
        written.push(cert_path);
    }
    Ok(written)
}
