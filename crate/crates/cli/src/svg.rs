//! Static renderings of exported views. They read the exported JSON, so a
//! drawing always shows exactly what was written next to it.

use std::fmt::Write;

use serde_json::Value;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = x;
        for p in points {
            x = (x.0.min(p[0]), x.1.max(p[0]));
            y = (y.0.min(p[1]), y.1.max(p[1]));
        }
        let widen = |(lo, hi): (f64, f64)| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = PAD + (p[0] - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD);
        let sy = H - PAD - (p[1] - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD);
        (sx, sy)
    }

    fn path(&self, pts: &[[f64; 2]], close: bool) -> String {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let (x, y) = self.px(*p);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
        }
        if close {
            d.push('Z');
        }
        d
    }
}

fn open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-size=\"14\">{}</text>\n",
        escape(title)
    )
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(out, "<text x=\"{PAD}\" y=\"{}\">{}</text>", H - PAD + 16.0, fmt(f.x.0));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", W - PAD, H - PAD + 16.0, fmt(f.x.1));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", PAD - 4.0, H - PAD, fmt(f.y.0));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", PAD - 4.0, PAD + 10.0, fmt(f.y.1));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(out, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>", H / 2.0, H / 2.0, escape(ylabel));
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn pair(v: &Value) -> Option<[f64; 2]> {
    Some([num(v.get(0)?)?, num(v.get(1)?)?])
}

fn pairs(v: &Value) -> Vec<[f64; 2]> {
    v.as_array().map(|a| a.iter().filter_map(pair).collect()).unwrap_or_default()
}

/// `[{step, value}]` as chart points; non-finite values are skipped.
fn series(v: &Value) -> Vec<[f64; 2]> {
    v.as_array()
        .map(|a| a.iter().filter_map(|p| Some([num(&p["step"])?, num(&p["value"])?])).collect())
        .unwrap_or_default()
}

fn line_chart(title: &str, ylabel: &str, lines: &[(String, Vec<[f64; 2]>)]) -> String {
    let frame = Frame::fit(lines.iter().flat_map(|(_, pts)| pts.iter()));
    let mut out = open(title);
    axes(&mut out, &frame, "step", ylabel);
    for (i, (name, pts)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", frame.path(pts, false));
        if lines.len() > 1 {
            let y = PAD + 14.0 + 14.0 * i as f64;
            let _ = writeln!(out, "<text x=\"{}\" y=\"{y}\" fill=\"{color}\" text-anchor=\"end\">{}</text>", W - PAD - 6.0, escape(name));
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn progression(doc: &Value) -> String {
    let pts = series(&doc["progression"]["points"]);
    line_chart("Remaining distance to the final point", "fraction remaining", &[("progression".into(), pts)])
}

pub fn groups(doc: &Value) -> String {
    let one = |g: &Value| -> Vec<(String, Vec<[f64; 2]>)> {
        let name = g["group"].as_str().unwrap_or("group").to_string();
        match g["members"].as_array() {
            Some(members) => members
                .iter()
                .map(|m| (m["instance_id"].as_str().unwrap_or(&name).to_string(), series(&m["points"])))
                .collect(),
            None => vec![(name, series(&g["series"]))],
        }
    };
    let lines: Vec<_> = match doc["groups"].as_array() {
        Some(all) => all.iter().flat_map(one).collect(),
        None => one(doc),
    };
    line_chart("Constraint values per step", "value", &lines)
}

pub fn paths(doc: &Value) -> String {
    let set = &doc["projection"];
    let paths: Vec<(u64, Vec<[f64; 2]>)> = set["paths"]
        .as_array()
        .map(|a| a.iter().map(|p| (p["step"].as_u64().unwrap_or(0), pairs(&p["points"]))).collect())
        .unwrap_or_default();
    let trajectories: Vec<Vec<[f64; 2]>> = set["trajectories"]
        .as_array()
        .map(|a| a.iter().map(|t| pairs(&t["points"])).collect())
        .unwrap_or_default();
    let frame = Frame::fit(paths.iter().flat_map(|(_, p)| p.iter()).chain(trajectories.iter().flatten()));
    let mut out = open("Path evolution");
    axes(&mut out, &frame, "PC1", "PC2");
    let last = paths.len().saturating_sub(1).max(1) as f64;
    for (i, (_, pts)) in paths.iter().enumerate() {
        let shade = 220.0 - 180.0 * i as f64 / last;
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"rgb({1:.0},{1:.0},{1:.0})\" stroke-width=\"1\"/>",
            frame.path(pts, false),
            shade
        );
    }
    for (i, pts) in trajectories.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", frame.path(pts, false));
    }
    out.push_str("</svg>\n");
    out
}

fn ramp(i: usize, n: usize) -> String {
    // Light yellow to dark green.
    let t = if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    let lerp = |a: f64, b: f64| a + (b - a) * t;
    format!("rgb({:.0},{:.0},{:.0})", lerp(255.0, 0.0), lerp(255.0, 69.0), lerp(204.0, 41.0))
}

pub fn landscape(doc: &Value) -> String {
    let w = &doc["grid"]["plane"]["window"];
    let corner = |s: &str, t: &str| Some([num(&w[s])?, num(&w[t])?]);
    let corners = [corner("s_min", "t_min"), corner("s_max", "t_max")];
    let frame = Frame::fit(corners.iter().flatten());
    let title = format!("Landscape on plane {}", doc["plane_id"].as_str().unwrap_or("?"));
    let mut out = open(&title);
    if let Some(field) = doc["isobands"].get(0) {
        let bands = field["bands"]["bands"].as_array().cloned().unwrap_or_default();
        for (i, band) in bands.iter().enumerate() {
            let color = ramp(i, bands.len());
            for poly in band["polygons"].as_array().into_iter().flatten() {
                let pts = pairs(poly);
                let _ = writeln!(out, "<path d=\"{}\" fill=\"{color}\" stroke=\"{color}\" stroke-width=\"0.3\"/>", frame.path(&pts, true));
            }
        }
    }
    for poly in doc["feasibility"]["polygons"].as_array().into_iter().flatten() {
        let pts = pairs(poly);
        let _ = writeln!(out, "<path d=\"{}\" fill=\"#c00\" fill-opacity=\"0.25\" stroke=\"none\"/>", frame.path(&pts, true));
    }
    let traj: Vec<[f64; 2]> = doc["trajectory"]["steps"]
        .as_array()
        .map(|a| a.iter().filter_map(|s| Some([num(&s["coords"]["s"])?, num(&s["coords"]["t"])?])).collect())
        .unwrap_or_default();
    let _ = writeln!(out, "<path d=\"{}\" fill=\"none\" stroke=\"#222\" stroke-width=\"1.2\"/>", frame.path(&traj, false));
    if let Some(end) = traj.last() {
        let (x, y) = frame.px(*end);
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"#222\"/>");
    }
    axes(&mut out, &frame, "s", "t");
    out.push_str("</svg>\n");
    out
}
