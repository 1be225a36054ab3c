//! Static SVG charts of a run: speed, lateral position, and a top-down view.
//!
//! Output is plain text with fixed number formatting, so identical logs
//! give identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use avsup_core::sim::SimLog;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const EGO_COLOR: &str = "#1f77b4";
const REF_COLOR: &str = "#ff7f0e";
const PED_COLORS: [&str; 4] = ["#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
const COLLISION_COLOR: &str = "#d62728";

/// Tick spacing from {1, 2, 5}·10^k giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    if !(span > 0.0) {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    let s = format!("{:.*}", decimals, v);
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

struct Marker {
    x: f64,
    y: f64,
    label: String,
}

struct Chart<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    series: Vec<Series<'a>>,
    hlines: Vec<(f64, &'a str)>,
    markers: Vec<Marker>,
}

impl<'a> Chart<'a> {
    fn new(title: &'a str, x_label: &'a str, y_label: &'a str) -> Self {
        Self {
            title,
            x_label,
            y_label,
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            series: Vec::new(),
            hlines: Vec::new(),
            markers: Vec::new(),
        }
    }

    /// Fits both ranges to the data with a little padding on Y.
    fn autoscale(&mut self, y_floor_span: f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        for &(y, _) in &self.hlines {
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        let span = (y1 - y0).max(y_floor_span);
        let mid = 0.5 * (y0 + y1);
        let pad = 0.1 * span;
        self.x_range = (x0, x1);
        self.y_range = (mid - 0.5 * span - pad, mid + 0.5 * span + pad);
    }

    fn px(&self, x: f64) -> f64 {
        let (a, b) = self.x_range;
        MARGIN_LEFT + (x - a) / (b - a) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b) = self.y_range;
        HEIGHT - MARGIN_BOTTOM - (y - a) / (b - a) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn render(&self) -> String {
        let mut s = String::new();
        let plot_r = WIDTH - MARGIN_RIGHT;
        let plot_b = HEIGHT - MARGIN_BOTTOM;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            0.5 * (MARGIN_LEFT + plot_r),
            self.title
        );

        let xs = nice_step(self.x_range.1 - self.x_range.0, 8.0);
        let mut t = (self.x_range.0 / xs).ceil() * xs;
        while t <= self.x_range.1 + 1e-9 {
            let x = self.px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{MARGIN_TOP:.2}" x2="{x:.2}" y2="{plot_b:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                plot_b + 16.0,
                fmt_tick(t, xs)
            );
            t += xs;
        }
        let ys = nice_step(self.y_range.1 - self.y_range.0, 6.0);
        let mut t = (self.y_range.0 / ys).ceil() * ys;
        while t <= self.y_range.1 + 1e-9 {
            let y = self.py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_LEFT:.2}" y1="{y:.2}" x2="{plot_r:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_LEFT - 6.0,
                y + 4.0,
                fmt_tick(t, ys)
            );
            t += ys;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            plot_r - MARGIN_LEFT,
            plot_b - MARGIN_TOP
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            0.5 * (MARGIN_LEFT + plot_r),
            HEIGHT - 10.0,
            self.x_label
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            0.5 * (MARGIN_TOP + plot_b),
            0.5 * (MARGIN_TOP + plot_b),
            self.y_label
        );

        for &(y, color) in &self.hlines {
            let py = self.py(y);
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN_LEFT:.2}" y1="{py:.2}" x2="{plot_r:.2}" y2="{py:.2}" stroke="{color}" stroke-width="1.5"/>"#
            );
        }

        for (i, ser) in self.series.iter().enumerate() {
            if ser.points.is_empty() {
                continue;
            }
            let mut pts = String::new();
            for &(x, y) in &ser.points {
                let _ = write!(pts, "{:.2},{:.2} ", self.px(x), self.py(y));
            }
            let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
                ser.color,
                pts.trim_end()
            );
            let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                plot_r + 10.0,
                plot_r + 34.0,
                ser.color,
                plot_r + 40.0,
                ly + 4.0,
                ser.label
            );
        }

        for m in &self.markers {
            let (x, y) = (self.px(m.x), self.py(m.y));
            let _ = writeln!(
                s,
                r#"<g class="collision"><circle cx="{x:.2}" cy="{y:.2}" r="7" fill="none" stroke="{COLLISION_COLOR}" stroke-width="2.5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="{COLLISION_COLOR}" font-weight="bold">{}</text></g>"#,
                y - 12.0,
                m.label
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn collision_markers(log: &SimLog, pick: impl Fn(usize) -> (f64, f64)) -> Vec<Marker> {
    log.collisions
        .iter()
        .map(|c| {
            let k = ((c.time / log.dt).round() as usize).min(log.steps.len().saturating_sub(1));
            let (x, y) = pick(k);
            Marker {
                x,
                y,
                label: format!("collision {}", c.pedestrian),
            }
        })
        .collect()
}

pub fn speed_plot(log: &SimLog) -> String {
    let mut c = Chart::new("EGO speed", "time [s]", "speed [m/s]");
    c.series.push(Series {
        label: "vx",
        color: EGO_COLOR,
        dashed: false,
        points: log.steps.iter().map(|r| (r.time, r.state.vx_body)).collect(),
    });
    c.autoscale(2.0);
    c.markers = collision_markers(log, |k| (log.steps[k].time, log.steps[k].state.vx_body));
    c.render()
}

pub fn lateral_plot(log: &SimLog) -> String {
    let mut c = Chart::new("EGO lateral position", "time [s]", "Y [m]");
    c.series.push(Series {
        label: "Y",
        color: EGO_COLOR,
        dashed: false,
        points: log.steps.iter().map(|r| (r.time, r.state.y_world)).collect(),
    });
    c.series.push(Series {
        label: "Y reference",
        color: REF_COLOR,
        dashed: true,
        points: log.steps.iter().map(|r| (r.time, r.lateral_ref)).collect(),
    });
    c.autoscale(2.0);
    c.markers = collision_markers(log, |k| (log.steps[k].time, log.steps[k].state.y_world));
    c.render()
}

pub fn topdown_plot(log: &SimLog) -> String {
    let mut c = Chart::new("Top-down view", "X [m]", "Y [m]");
    c.series.push(Series {
        label: "EGO",
        color: EGO_COLOR,
        dashed: false,
        points: log.steps.iter().map(|r| (r.state.x_world, r.state.y_world)).collect(),
    });
    for (i, (name, &px)) in log.pedestrian_names.iter().zip(&log.pedestrian_x).enumerate() {
        let mut points: Vec<(f64, f64)> = log.steps.iter().map(|r| (px, r.pedestrians[i].y)).collect();
        points.dedup();
        c.series.push(Series {
            label: name,
            color: PED_COLORS[i % PED_COLORS.len()],
            dashed: false,
            points,
        });
    }
    c.hlines = vec![(0.0, "#555555"), (4.0, "#555555")];
    c.autoscale(4.0);
    c.markers = collision_markers(log, |k| (log.steps[k].state.x_world, log.steps[k].state.y_world));
    c.render()
}

pub const PLOT_FILES: [&str; 3] = ["speed.svg", "lateral.svg", "topdown.svg"];

pub fn emit_plots(log: &SimLog, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let docs = [speed_plot(log), lateral_plot(log), topdown_plot(log)];
    let mut written = Vec::with_capacity(docs.len());
    for (name, doc) in PLOT_FILES.iter().zip(docs) {
        let path = dir.join(name);
        fs::write(&path, doc)?;
        written.push(path);
    }
    Ok(written)
}
