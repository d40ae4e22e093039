//! Artifact writers. Every file starts with a provenance header: a `meta`
//! object in JSON, a `#` comment line in CSV, an XML comment in SVG and
//! a fixed header in the bitstream.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

pub const TOOL: &str = "kickgate";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    pub fn header_line(&self) -> String {
        format!(
            "{} {} subcommand={} config_sha256={} seed={}",
            self.tool, self.version, self.subcommand, self.config_sha256, self.seed
        )
    }
}

/// `{"meta": ..., <fields of body>}`, pretty-printed with a trailing newline.
pub fn json<T: Serialize>(meta: &Meta, body: &T) -> anyhow::Result<Vec<u8>> {
    let mut map = Map::new();
    map.insert("meta".into(), serde_json::to_value(meta)?);
    match serde_json::to_value(body)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    let mut out = serde_json::to_vec_pretty(&Value::Object(map))?;
    out.push(b'\n');
    Ok(out)
}

/// Compact single-line variant of [`json`].
pub fn json_line<T: Serialize>(meta: &Meta, body: &T) -> anyhow::Result<Vec<u8>> {
    let mut map = Map::new();
    map.insert("meta".into(), serde_json::to_value(meta)?);
    if let Value::Object(fields) = serde_json::to_value(body)? {
        map.extend(fields);
    }
    let mut out = serde_json::to_vec(&Value::Object(map))?;
    out.push(b'\n');
    Ok(out)
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(meta: &Meta, columns: &[&str]) -> Self {
        let mut buf = format!("# {}\n", meta.header_line());
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers at every vertex.
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Keep one unit on x equal to one unit on y (phase-space plots).
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl Plot {
    pub fn render(&self, meta: &Meta) -> Vec<u8> {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = || self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts() {
            x0 = x0.min(tx(x));
            x1 = x1.max(tx(x));
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = (*hi - *lo).max(1e-12 * lo.abs().max(1.0));
            *lo -= 0.05 * span;
            *hi += 0.05 * span;
        };
        pad(&mut x0, &mut x1);
        pad(&mut y0, &mut y1);
        let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
        let (mut sx, mut sy) = (pw / (x1 - x0), ph / (y1 - y0));
        if self.equal_aspect {
            let s = sx.min(sy);
            x0 -= 0.5 * (pw / s - (x1 - x0));
            y0 -= 0.5 * (ph / s - (y1 - y0));
            (sx, sy) = (s, s);
            x1 = x0 + pw / s;
            y1 = y0 + ph / s;
        }
        let px = |x: f64| MARGIN + (tx(x) - x0) * sx;
        let py = |y: f64| H - MARGIN - (y - y0) * sy;

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(s, "<!-- {} -->", meta.header_line());
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ =
            writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ =
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(&self.y_label)
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let xl = if self.log_x { format!("{:.3e}", 10f64.powf(xv)) } else { tick(xv) };
            let (gx, gy) = (MARGIN + f * pw, H - MARGIN - f * ph);
            let _ = writeln!(s, r#"<text x="{gx:.2}" y="{:.2}" text-anchor="middle">{xl}</text>"#, H - MARGIN + 16.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                gy + 4.0,
                tick(yv)
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            if series.markers {
                for &(x, y) in &series.points {
                    let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="{color}"/>"#, px(x), py(y));
                }
            }
            let ly = MARGIN + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
                W - MARGIN - 6.0,
                esc(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s.into_bytes()
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta { tool: TOOL, version: VERSION, subcommand: "test".into(), config_sha256: "ab".into(), seed: 3 }
    }

    #[test]
    fn json_carries_meta_first() {
        #[derive(Serialize)]
        struct Body {
            x: f64,
        }
        let text = String::from_utf8(json(&meta(), &Body { x: 1.5 }).unwrap()).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["meta"]["config_sha256"], "ab");
        assert_eq!(v["x"], 1.5);
        assert!(text.find("meta").unwrap() < text.find("\"x\"").unwrap());
        assert_eq!(json_line(&meta(), &Body { x: 1.5 }).unwrap().iter().filter(|&&b| b == b'\n').count(), 1);
    }

    #[test]
    fn csv_and_svg_headers() {
        let mut c = Csv::new(&meta(), &["a", "b"]);
        c.row(&["1".into(), "2".into()]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), format!("# {}\na,b\n1,2\n", meta().header_line()));
        let plot = Plot {
            title: "t <x>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            equal_aspect: false,
            series: vec![Series { label: "s".into(), points: vec![(1.0, 0.0), (10.0, 1.0)], markers: true }],
        };
        let svg = String::from_utf8(plot.render(&meta())).unwrap();
        assert!(svg.lines().nth(1).unwrap().starts_with("<!-- kickgate"));
        assert!(svg.contains("t &lt;x&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
