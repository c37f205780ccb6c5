//! Hand-rolled SVG rendering for the CSV artifacts: learning curves,
//! Light-Dark trajectories with one-standard-deviation belief circles, and
//! per-step belief-entropy curves. Plots are presentation artifacts only;
//! nothing downstream reads them back.

use std::fmt::Write as _;
use std::path::Path;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 54.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_series(series: &[Series]) -> Self {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for s in series {
            for &(x, y) in &s.points {
                f.x_min = f.x_min.min(x);
                f.x_max = f.x_max.max(x);
                f.y_min = f.y_min.min(y);
                f.y_max = f.y_max.max(y);
            }
        }
        if !f.x_min.is_finite() {
            f = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if f.x_max == f.x_min {
            f.x_max = f.x_min + 1.0;
        }
        if f.y_max == f.y_min {
            f.y_max = f.y_min + 1.0;
        }
        f
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    let x0 = frame.sx(frame.x_min);
    let x1 = frame.sx(frame.x_max);
    let y0 = frame.sy(frame.y_min);
    let y1 = frame.sy(frame.y_max);
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#333\"/>"
    );
    for i in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"10\">{}</text>",
            frame.sx(fx),
            y0 + 16.0,
            trim_number(fx)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"10\">{}</text>",
            x0 - 6.0,
            frame.sy(fy) + 3.0,
            trim_number(fy)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\" transform=\"rotate(-90 14 {})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    out
}

fn trim_number(x: f64) -> String {
    if x.abs() >= 1000.0 {
        format!("{x:.0}")
    } else {
        let s = format!("{x:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Polyline chart of one or more series with a small legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::from_series(series);
    let mut out = svg_header(title);
    out.push_str(&axes(&frame, x_label, y_label));
    for (i, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.sx(x), frame.sy(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        );
        let ly = 40.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN - 120.0,
            WIDTH - MARGIN - 100.0,
            WIDTH - MARGIN - 94.0,
            ly + 4.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// A planar trajectory: the estimated path with one-standard-deviation
/// circles per step, the true path, the goal, and the light line.
pub struct TrajectoryPlot {
    pub belief_means: Vec<(f64, f64)>,
    pub belief_stds: Vec<f64>,
    pub true_path: Vec<(f64, f64)>,
    pub goal: (f64, f64),
    pub light_x: f64,
}

pub fn trajectory_chart(title: &str, traj: &TrajectoryPlot) -> String {
    let mut all: Vec<(f64, f64)> = traj.belief_means.clone();
    all.extend(&traj.true_path);
    all.push(traj.goal);
    all.push((traj.light_x, 0.0));
    // Inflate by the largest circle so everything stays inside the frame.
    let pad = traj.belief_stds.iter().cloned().fold(0.5, f64::max);
    let series = [Series {
        label: String::new(),
        points: all
            .iter()
            .flat_map(|&(x, y)| [(x - pad, y - pad), (x + pad, y + pad)])
            .collect(),
    }];
    let frame = Frame::from_series(&series);
    let mut out = svg_header(title);
    out.push_str(&axes(&frame, "x", "y"));

    let lx = frame.sx(traj.light_x);
    let _ = writeln!(
        out,
        "<line x1=\"{lx}\" y1=\"{}\" x2=\"{lx}\" y2=\"{}\" stroke=\"#f0c330\" \
         stroke-width=\"2\" stroke-dasharray=\"6,4\"/>",
        frame.sy(frame.y_min),
        frame.sy(frame.y_max)
    );
    for (&(mx, my), &sd) in traj.belief_means.iter().zip(&traj.belief_stds) {
        let r = (frame.sx(mx + sd) - frame.sx(mx)).abs();
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" fill=\"none\" stroke=\"#1f77b4\" \
             stroke-opacity=\"0.6\"/>",
            frame.sx(mx),
            frame.sy(my)
        );
    }
    let mean_pts: Vec<String> = traj
        .belief_means
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.sx(x), frame.sy(y)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>",
        mean_pts.join(" ")
    );
    let true_pts: Vec<String> = traj
        .true_path
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.sx(x), frame.sy(y)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" \
         stroke-dasharray=\"3,3\" points=\"{}\"/>",
        true_pts.join(" ")
    );
    let _ = writeln!(
        out,
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"#2ca02c\"/>",
        frame.sx(traj.goal.0),
        frame.sy(traj.goal.1)
    );
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, svg: &str) -> std::io::Result<()> {
    std::fs::write(path, svg)
}
