//! Deterministic report artifacts: canonical JSON, text files, and a small
//! static SVG line plot.
//!
//! JSON output sorts object keys, prints integers as integers and every
//! other number with 12 significant digits, so identical results always
//! serialize to identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::domain::fmt_sig;
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";

/// Named result fields of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    experiment: String,
    fields: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), fields: BTreeMap::new() }
    }

    pub fn experiment(&self) -> &str {
        &self.experiment
    }

    /// Stores any serializable value under `key`, replacing an earlier one.
    /// Non-finite floats become `null`.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Serialize) -> Result<()> {
        let key = key.into();
        if key == "experiment" {
            return Err(Error::InvalidInput("\"experiment\" is a reserved report key".into()));
        }
        let value = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        self.fields.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn to_value(&self) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("experiment".into(), Value::String(self.experiment.clone()));
        for (k, v) in &self.fields {
            map.insert(k.clone(), v.clone());
        }
        Value::Object(map)
    }

    pub fn to_json(&self) -> String {
        let mut out = canonical_json(&self.to_value());
        out.push('\n');
        out
    }

    /// Writes `report.json` into `dir`, creating the directory if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(REPORT_FILE);
        write_file(&path, &self.to_json())?;
        Ok(path)
    }
}

/// Canonical pretty-printed JSON with sorted keys and fixed number format.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
    } else if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
    } else {
        // serde_json numbers are always finite
        out.push_str(&fmt_sig(n.as_f64().unwrap_or(0.0)));
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        // short scalar arrays stay on one line
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, level);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push_str("{\n");
            for (k, (key, item)) in sorted.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push_str(": ");
                write_value(out, item, level + 1);
                out.push_str(if k + 1 < sorted.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push('}');
        }
    }
}

/// Writes `contents` to `path`, creating parent directories. Failures carry
/// the offending path.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// One polyline of a plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

const SVG_WIDTH: f64 = 720.0;
const SVG_HEIGHT: f64 = 450.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn data_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Static line plot with labelled axes, tick marks and a legend. Points
/// with non-finite coordinates are dropped.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (Some((x0, x1)), Some((y0, y1))) =
        (data_range(all().map(|p| p.0)), data_range(all().map(|p| p.1)))
    else {
        return Err(Error::InvalidInput("nothing to plot".into()));
    };
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;
    let bottom = MARGIN_TOP + plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/></g>"#,
        l = MARGIN_LEFT,
        r = MARGIN_LEFT + plot_w,
        t = MARGIN_TOP,
        b = bottom
    );
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 15.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 20 {cy:.2})">{}</text>"#,
        xml_escape(y_label),
        cy = MARGIN_TOP + plot_h / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_TOP + 15.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            xml_escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_report_is_minimal() {
        let r = Report::new("c0");
        assert_eq!(r.to_json(), "{\n  \"experiment\": \"c0\"\n}\n");
        let back: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, json!({"experiment": "c0"}));
    }

    #[test]
    fn keys_sorted_and_numbers_fixed() {
        let mut r = Report::new("x");
        r.insert("zeta", 0.1).unwrap();
        r.insert("alpha", 3_u32).unwrap();
        r.insert("nested", json!({"b": [1.5, -2], "a": null})).unwrap();
        let text = r.to_json();
        let a = text.find("\"alpha\"").unwrap();
        let e = text.find("\"experiment\"").unwrap();
        let z = text.find("\"zeta\"").unwrap();
        assert!(a < e && e < z);
        assert!(text.contains("\"zeta\": 1.00000000000e-1"));
        assert!(text.contains("\"alpha\": 3"));
        assert!(text.contains("\"b\": [1.50000000000e0, -2]"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["zeta"], json!(0.1));
        assert!(text.find("\"a\": null").unwrap() < text.find("\"b\"").unwrap());
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let build = || {
            let mut r = Report::new("solve");
            r.insert("gap", 1.0 / 3.0).unwrap();
            r.insert("list", vec![std::f64::consts::PI, 2.0]).unwrap();
            r.to_json()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn non_finite_becomes_null() {
        let mut r = Report::new("x");
        r.insert("bad", f64::NAN).unwrap();
        assert!(r.to_json().contains("\"bad\": null"));
    }

    #[test]
    fn reserved_key_rejected() {
        let mut r = Report::new("x");
        assert!(r.insert("experiment", 1).is_err());
    }

    #[test]
    fn io_error_names_path() {
        let dir = std::env::temp_dir().join(format!("hj-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let blocker = dir.join("file");
        fs::write(&blocker, "x").unwrap();
        // a regular file cannot act as a directory
        let err = Report::new("x").write(&blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
        assert!(matches!(err, Error::Io { .. }));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn svg_has_polyline_and_axes() {
        let s = Series::new("u", (0..10).map(|k| (k as f64, (k * k) as f64)).collect());
        let svg = svg_line_plot("demo", "x", "u(x)", &[s]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("class=\"axes\""));
        assert!(svg.contains(">u(x)</text>"));
        assert!(svg_line_plot("t", "x", "y", &[]).is_err());
    }
}
