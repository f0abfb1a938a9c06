//! Sweep tables, CSV emission and minimal SVG line charts.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// One aggregated grid point of a Monte Carlo or state-evolution sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Variant label, e.g. `vectorial` or `ui`.
    pub series: String,
    /// Named coordinates of the grid point, in column order.
    pub params: Vec<(String, f64)>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub recovery_rate: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn validate(&self) -> Result<()> {
        let names = |r: &SweepRow| r.params.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
        for r in &self.rows {
            if !(r.q25 <= r.median && r.median <= r.q75) {
                return Err(Error::Domain(format!("quantiles out of order in series {}", r.series)));
            }
            if !(0.0..=1.0).contains(&r.recovery_rate) {
                return Err(Error::Domain(format!("recovery rate {} outside [0, 1]", r.recovery_rate)));
            }
            if names(r) != names(&self.rows[0]) {
                return Err(Error::Format("rows carry different parameter columns".into()));
            }
        }
        Ok(())
    }

    pub fn param(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// CSV with `echo` as a `#`-comment block above the header.
    pub fn to_csv(&self, echo: &str) -> String {
        let mut out = comment_block(echo, "# ");
        let mut header = vec!["series".to_string()];
        if let Some(first) = self.rows.first() {
            header.extend(first.params.iter().map(|(n, _)| n.clone()));
        }
        header.extend(["median", "q25", "q75", "recovery_rate", "trials", "seed"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![csv_field(&r.series)];
            cells.extend(r.params.iter().map(|(_, v)| v.to_string()));
            cells.extend([r.median, r.q25, r.q75, r.recovery_rate].map(|v| v.to_string()));
            cells.push(r.trials.to_string());
            cells.push(r.seed.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Prefixes every line of `text` (none if empty).
pub fn comment_block(text: &str, prefix: &str) -> String {
    text.lines().map(|l| format!("{prefix}{l}\n")).collect()
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Generic CSV table: comment block, header, rows.
pub fn csv_table(echo: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = comment_block(echo, "# ");
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Vertical reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub name: String,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
    /// Fixed y range; derived from the data when `None`.
    pub y_range: Option<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl LineChart {
    /// Standalone SVG document; `echo` is embedded as an XML comment.
    pub fn to_svg(&self, echo: &str) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).chain(self.markers.iter().map(|m| m.x));
        let (xmin, xmax) = span(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
        let (ymin, ymax) = self.y_range.unwrap_or_else(|| {
            let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
            span(ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max))
        });
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - ymin) / (ymax - ymin)) * ph;

        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(s, "<!--\n{}-->", echo.replace("--", "- -").lines().map(|l| format!("{l}\n")).collect::<String>());
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(s, "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>", LEFT + pw / 2.0, escape_xml(&self.title));
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let (gx, gy) = (LEFT + f * pw, TOP + (1.0 - f) * ph);
            let _ = writeln!(s, "<line x1=\"{gx:.2}\" y1=\"{TOP}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#e0e0e0\"/>", TOP + ph);
            let _ = writeln!(s, "<line x1=\"{LEFT}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#e0e0e0\"/>", LEFT + pw);
            let _ = writeln!(s, "<text x=\"{gx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", TOP + ph + 16.0, fmt_tick(xmin + f * (xmax - xmin)));
            let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", LEFT - 6.0, gy + 4.0, fmt_tick(ymin + f * (ymax - ymin)));
        }
        let _ = writeln!(s, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", LEFT + pw / 2.0, H - 14.0, escape_xml(&self.x_label));
        let _ = writeln!(
            s,
            "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape_xml(&self.y_label)
        );
        let mut legend_y = TOP + 10.0;
        for (i, ser) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
            for &(x, y) in &ser.points {
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>", sx(x), sy(y));
            }
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(s, "<line x1=\"{lx}\" y1=\"{legend_y}\" x2=\"{}\" y2=\"{legend_y}\" stroke=\"{color}\" stroke-width=\"2\"/>", lx + 20.0);
            let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", lx + 26.0, legend_y + 4.0, escape_xml(&ser.name));
            legend_y += 18.0;
        }
        for m in &self.markers {
            let x = sx(m.x);
            let _ = writeln!(s, "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>", TOP + ph);
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(s, "<line x1=\"{lx}\" y1=\"{legend_y}\" x2=\"{}\" y2=\"{legend_y}\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>", lx + 20.0);
            let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", lx + 26.0, legend_y + 4.0, escape_xml(&m.name));
            legend_y += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
