//! Selection reports: JSON with a config echo and input digests, the residual
//! history as CSV, and an SVG plot of residual norms per iteration.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binio::atomic_write;
use crate::pursuit::Selection;

/// Bumped whenever a field of [`SelectionReport`] changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: impl AsRef<Path>) -> io::Result<InputDigest> {
    let path = path.as_ref();
    let data = fs::read(path)?;
    Ok(InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&data)), bytes: data.len() as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Every option the run was invoked with.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub selection: Selection,
}

impl SelectionReport {
    pub fn new(command: &str, config: serde_json::Value, inputs: Vec<InputDigest>, selection: Selection) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs,
            selection,
        }
    }
}

pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> io::Result<()> {
    atomic_write(path.as_ref(), bytes)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `iteration,residual` rows, starting at iteration 0.
pub fn residual_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,residual\n");
    for (k, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{k},{r:e}");
    }
    out
}

pub fn parse_residual_csv(text: &str) -> Option<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next()? != "iteration,residual" {
        return None;
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let (idx, val) = line.split_once(',')?;
            (idx.parse::<usize>().ok()? == k).then_some(())?;
            val.parse().ok()
        })
        .collect()
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

/// Line plot of one or more residual histories on a log scale.
pub fn residual_svg(title: &str, series: &[(&str, &[f64])]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let floor = 1e-16;
    let logs: Vec<Vec<f64>> =
        series.iter().map(|(_, ys)| ys.iter().map(|y| y.max(floor).log10()).collect()).collect();
    let all = logs.iter().flatten();
    let lo = all.clone().fold(f64::INFINITY, |a, &b| a.min(b)).floor();
    let mut hi = all.fold(f64::NEG_INFINITY, |a, &b| a.max(b)).ceil();
    if !lo.is_finite() {
        return String::from("<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n");
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let max_len = series.iter().map(|(_, ys)| ys.len()).max().unwrap_or(1).max(2);
    let x = |k: usize| left + (w - left - right) * k as f64 / (max_len - 1) as f64;
    let y = |v: f64| top + (h - top - bottom) * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>", w / 2.0, escape(title));
    let _ = writeln!(s, "<g stroke=\"#888\" stroke-width=\"1\"><line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\"/></g>", h - bottom, w - right, h - bottom, h - bottom);
    let decades = (hi - lo) as usize;
    let step = decades.div_ceil(8).max(1);
    for d in (0..=decades).step_by(step) {
        let v = lo + d as f64;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{}</text>", left - 6.0, y(v) + 4.0, v as i64);
    }
    let xstep = (max_len - 1).div_ceil(10).max(1);
    for k in (0..max_len).step_by(xstep) {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{k}</text>", x(k), h - bottom + 16.0);
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration</text>", w / 2.0, h - 12.0);
    let _ = writeln!(s, "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">residual norm</text>", h / 2.0, h / 2.0);
    for (i, ((name, _), ys)) in series.iter().zip(&logs).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ys.iter().enumerate().map(|(k, &v)| format!("{:.1},{:.1}", x(k), y(v))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        for p in &pts {
            let (px, py) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(s, "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>");
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{ly:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>", w - right - 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
