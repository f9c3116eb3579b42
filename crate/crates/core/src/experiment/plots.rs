//! Standalone SVG figures for a finished run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{read_csv, read_episodes, ProbeRow, EPISODES_FILE, PCA_FILE, PROBES_FILE};
use crate::error::{Error, Result};
use crate::probe::analysis::{allocation_points, throughput_curve, THROUGHPUT_HALF_WINDOW};
use crate::stats;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

enum Mark {
    Line { pts: Vec<(f64, f64)>, colour: String, label: String },
    Band { xs: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, colour: String, label: String },
    Dots { pts: Vec<(f64, f64)>, colours: Vec<String> },
}

/// A minimal x-y chart.
struct Figure {
    title: String,
    xlabel: String,
    ylabel: String,
    marks: Vec<Mark>,
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Figure { title: title.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), marks: Vec::new() }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        };
        for m in &self.marks {
            match m {
                Mark::Line { pts, .. } | Mark::Dots { pts, .. } => pts.iter().for_each(|&(x, y)| add(x, y)),
                Mark::Band { xs, lo, hi, .. } => {
                    for i in 0..xs.len() {
                        add(xs[i], lo[i]);
                        add(xs[i], hi[i]);
                    }
                }
            }
        }
        if b.0 > b.1 {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let (bx, by) = (LEFT, H - BOTTOM);
        let _ = writeln!(s, r#"<path d="M{bx},{TOP} V{by} H{}" stroke="black" fill="none"/>"#, W - RIGHT);
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(xv), by + 18.0, fmt_tick(xv));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, bx - 6.0, py(yv) + 4.0, fmt_tick(yv));
            let _ = writeln!(s, r##"<path d="M{bx},{:.1} H{}" stroke="#ddd"/>"##, py(yv), W - RIGHT);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(&self.xlabel));
        let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, escape(&self.ylabel));
        let mut legend = Vec::new();
        for m in &self.marks {
            match m {
                Mark::Band { xs, lo, hi, colour, label } => {
                    let mut d = String::new();
                    for i in 0..xs.len() {
                        let _ = write!(d, "{}{:.1},{:.1} ", if i == 0 { "M" } else { "L" }, px(xs[i]), py(hi[i]));
                    }
                    for i in (0..xs.len()).rev() {
                        let _ = write!(d, "L{:.1},{:.1} ", px(xs[i]), py(lo[i]));
                    }
                    let _ = writeln!(s, r#"<path d="{d}Z" fill="{colour}" fill-opacity="0.25" stroke="none"/>"#);
                    legend.push((colour.clone(), label.clone()));
                }
                Mark::Line { pts, colour, label } => {
                    let d: String = pts.iter().enumerate().map(|(i, &(x, y))| format!("{}{:.1},{:.1} ", if i == 0 { "M" } else { "L" }, px(x), py(y))).collect();
                    let _ = writeln!(s, r#"<path d="{d}" stroke="{colour}" stroke-width="2" fill="none"/>"#);
                    legend.push((colour.clone(), label.clone()));
                }
                Mark::Dots { pts, colours } => {
                    for (&(x, y), c) in pts.iter().zip(colours) {
                        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{c}" fill-opacity="0.8"/>"#, px(x), py(y));
                    }
                }
            }
        }
        for (i, (c, l)) in legend.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * i as f64;
            let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="10" fill="{c}"/>"#, W - RIGHT - 170.0, y - 9.0);
            let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, W - RIGHT - 152.0, escape(l));
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Blue for negative, red for positive values of `v / scale`.
fn diverging(v: f64, scale: f64) -> String {
    let f = (v / scale.max(1e-12)).clamp(-1.0, 1.0);
    let (r, b) = if f >= 0.0 { (200, (200.0 * (1.0 - f)) as u8 as i32) } else { ((200.0 * (1.0 + f)) as i32, 200) };
    format!("rgb({r},{},{b})", (200.0 * (1.0 - f.abs())) as i32)
}

/// Writes every figure whose inputs exist under `dir` into `dir/plots`.
pub fn export_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut figs: Vec<(&str, Figure)> = Vec::new();
    if dir.join(EPISODES_FILE).exists() {
        let recs = read_episodes(dir)?;
        let curves: Vec<Vec<f64>> = recs.iter().map(|r| throughput_curve(&r.cumulative())).filter(|c| !c.is_empty()).collect();
        if let Some(len) = curves.iter().map(|c| c.len()).min() {
            let pts = (0..len).map(|k| ((k + THROUGHPUT_HALF_WINDOW) as f64, stats::mean(&curves.iter().map(|c| c[k]).collect::<Vec<_>>()))).collect();
            let mut f = Figure::new("Throughput over the episode", "step", "reward per step");
            f.marks.push(Mark::Line { pts, colour: "#1f5fbf".into(), label: format!("mean of {} episodes", curves.len()) });
            figs.push(("throughput.svg", f));
        }
        let points = allocation_points(&recs);
        if points.iter().any(|p| p.advantage != 0.0) {
            let xs: Vec<f64> = points.iter().map(|p| p.advantage).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.task1_fraction).collect();
            let mut f = Figure::new("Partner allocation", "task-1 advantage", "fraction of steps on task 1");
            f.marks.push(Mark::Dots { pts: xs.iter().copied().zip(ys.iter().copied()).collect(), colours: vec!["#444".into(); xs.len()] });
            if let Some(b) = stats::ls_slope(&xs, &ys) {
                let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                f.marks.push(Mark::Line { pts: vec![(lo, my + b * (lo - mx)), (hi, my + b * (hi - mx))], colour: "#c0392b".into(), label: format!("slope {b:.3}") });
            }
            figs.push(("allocation.svg", f));
        }
    }
    if dir.join(PROBES_FILE).exists() {
        let rows: Vec<ProbeRow> = read_csv(&dir.join(PROBES_FILE))?;
        let mut ts: Vec<usize> = rows.iter().filter(|r| r.label == 1).map(|r| r.t).collect();
        ts.sort_unstable();
        ts.dedup();
        let at = |t: usize| rows.iter().filter(move |r| r.t == t && r.label == 1);
        let mut f = Figure::new("Probe accuracy against time", "t", "distance-aware accuracy");
        f.marks.push(Mark::Band {
            xs: ts.iter().map(|&t| t as f64).collect(),
            lo: ts.iter().map(|&t| at(t).map(|r| r.random_accuracy).fold(f64::INFINITY, f64::min)).collect(),
            hi: ts.iter().map(|&t| at(t).map(|r| r.random_accuracy).fold(f64::NEG_INFINITY, f64::max)).collect(),
            colour: "#999".into(),
            label: "random features".into(),
        });
        f.marks.push(Mark::Line {
            pts: ts.iter().map(|&t| (t as f64, stats::mean(&at(t).map(|r| r.accuracy).collect::<Vec<_>>()))).collect(),
            colour: "#1f5fbf".into(),
            label: "hidden state".into(),
        });
        figs.push(("probe_accuracy.svg", f));
    }
    if dir.join(PCA_FILE).exists() {
        #[derive(serde::Deserialize)]
        struct Row {
            x: f64,
            y: f64,
            advantage: f64,
        }
        let rows: Vec<Row> = read_csv(&dir.join(PCA_FILE))?;
        let scale = rows.iter().map(|r| r.advantage.abs()).fold(0.0, f64::max);
        let mut f = Figure::new("Hidden-state means, first two principal components", "PC 1", "PC 2");
        f.marks.push(Mark::Dots { pts: rows.iter().map(|r| (r.x, r.y)).collect(), colours: rows.iter().map(|r| diverging(r.advantage, scale)).collect() });
        figs.push(("pca.svg", f));
    }
    if figs.is_empty() {
        return Err(Error::Analysis(format!("nothing to plot in {}", dir.display())));
    }
    let out = dir.join("plots");
    fs::create_dir_all(&out)?;
    figs.into_iter()
        .map(|(name, f)| {
            let p = out.join(name);
            fs::write(&p, f.render())?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_has_nothing_to_plot() {
        let d = tempfile::tempdir().unwrap();
        let e = export_plots(d.path()).unwrap_err();
        assert!(e.to_string().contains("nothing to plot"));
    }

    #[test]
    fn figure_renders_valid_looking_svg() {
        let mut f = Figure::new("a < b", "x", "y");
        f.marks.push(Mark::Line { pts: vec![(0.0, 1.0), (1.0, 2.0)], colour: "red".into(), label: "l".into() });
        f.marks.push(Mark::Band { xs: vec![0.0, 1.0], lo: vec![0.0, 0.5], hi: vec![1.0, 1.5], colour: "grey".into(), label: "b".into() });
        let s = f.render();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
    }
}
