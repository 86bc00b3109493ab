//! CSV and SVG artifacts.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::analysis::ThresholdScan;
use crate::discretize::{AgeProfile, Grid};
use crate::lyapunov::DescentReport;
use crate::simulator::{Sample, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "S", "E", "I", "R", "N", "J"];

/// `x` rounded to 10 significant digits, printed in plain decimal when that
/// stays short and in exponent form otherwise.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if rounded == 0.0 || (1e-5..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub fn write_trajectory_csv(path: &Path, tr: &Trajectory) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &tr.samples {
        w.write_record([s.t, s.s, s.e, s.i, s.r, s.n, s.j].map(fmt_sig))?;
    }
    w.flush()
}

pub fn read_trajectory_csv(path: &Path) -> io::Result<Vec<Sample>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_HEADER {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<io::Result<_>>()?;
        out.push(Sample {
            t: v[0],
            s: v[1],
            e: v[2],
            i: v[3],
            r: v[4],
            n: v[5],
            j: v[6],
        });
    }
    Ok(out)
}

/// `<dir>/<stem>_profile_t<t>.csv` with columns `a,i`.
pub fn profile_path(dir: &Path, stem: &str, t: f64) -> PathBuf {
    dir.join(format!("{stem}_profile_t{}.csv", fmt_sig(t)))
}

pub fn write_profile_csv(path: &Path, profile: &AgeProfile, grid: &Grid) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["a", "i"])?;
    for (a, v) in grid.ages().zip(&profile.values) {
        w.write_record([fmt_sig(a), fmt_sig(*v)])?;
    }
    w.flush()
}

pub fn write_descent_csv(path: &Path, report: &DescentReport) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "V", "dV"])?;
    for row in &report.rows {
        w.write_record([row.t, row.v, row.dv].map(fmt_sig))?;
    }
    w.flush()
}

/// Columns `scale,R0,S_star,E_star,J_star`; the last three are empty where no
/// endemic point exists.
pub fn write_sweep_csv(path: &Path, scan: &ThresholdScan) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scale", "R0", "S_star", "E_star", "J_star"])?;
    for p in &scan.points {
        let end = p.endemic;
        w.write_record([
            fmt_sig(p.scale),
            fmt_sig(p.r0),
            opt(end.map(|e| e.s)),
            opt(end.map(|e| e.e)),
            opt(end.map(|e| e.j)),
        ])?;
    }
    w.flush()
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Self-contained SVG line chart of named series against a common abscissa.
pub fn line_chart(title: &str, x_label: &str, x: &[f64], series: &[(&str, &str, Vec<f64>)]) -> String {
    let finite = |v: &f64| v.is_finite();
    let (x0, x1) = bounds(x.iter().copied().filter(finite));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.2.iter().copied()).filter(finite));
    let (y0, y1) = (y0.min(0.0), if y1 > y0 { y1 } else { y0 + 1.0 });
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (SVG_W - 2.0 * MARGIN);
    let py = |v: f64| SVG_H - MARGIN - (v - y0) / (y1 - y0) * (SVG_H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, SVG_W / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, SVG_W - MARGIN, MARGIN, SVG_H - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(fx),
            bottom + 18.0,
            short(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(fy) + 4.0,
            short(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        SVG_W / 2.0,
        SVG_H - 20.0,
        escape(x_label)
    );
    for (idx, (name, color, ys)) in series.iter().enumerate() {
        let mut d = String::new();
        for (xv, yv) in x.iter().zip(ys) {
            if xv.is_finite() && yv.is_finite() {
                let cmd = if d.is_empty() { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{:.2} {:.2} ", px(*xv), py(*yv));
            }
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, d.trim_end());
        let ly = top + 16.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            right - 90.0,
            right - 70.0,
            right - 64.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn short(v: f64) -> String {
    if v != 0.0 && !(1e-3..1e5).contains(&v.abs()) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `S`, `E`, `I`, `J` against `t`.
pub fn trajectory_chart(tr: &Trajectory, title: &str) -> String {
    let col = |f: fn(&Sample) -> f64| tr.samples.iter().map(f).collect::<Vec<_>>();
    line_chart(
        title,
        "t",
        &col(|s| s.t),
        &[
            ("S", "#1f77b4", col(|s| s.s)),
            ("E", "#ff7f0e", col(|s| s.e)),
            ("I", "#d62728", col(|s| s.i)),
            ("J", "#2ca02c", col(|s| s.j)),
        ],
    )
}
