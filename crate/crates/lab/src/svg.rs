//! Static SVG rendering of [`PlotData`].

use std::fmt::Write;

use pathlattice::analysis::{Partial2d, PlotData, PlotPayload, RocCurve, ScoreHistograms, SegmentedLoss};

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const CLASS0: &str = "#1f77b4";
const CLASS1: &str = "#ff7f0e";
const LOSS: &str = "#e377c2";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e5).contains(&x.abs()) {
        let s = format!("{x:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    } else {
        format!("{x:.2e}")
    }
}

/// Linear map from a data range onto the plotting area.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Axis { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        Canvas { out }
    }

    fn x_axis() -> (f64, f64) {
        (LEFT, W - RIGHT)
    }

    fn y_axis() -> (f64, f64) {
        (H - BOTTOM, TOP)
    }

    fn frame(&mut self, x: Axis, y: Axis, xlabel: &str, ylabel: &str) {
        let (x0, x1) = Canvas::x_axis();
        let (y0, y1) = Canvas::y_axis();
        let _ = write!(
            self.out,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = x.lo + t * (x.hi - x.lo);
            let yv = y.lo + t * (y.hi - y.lo);
            let _ = write!(
                self.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x.map(xv),
                y0 + 16.0,
                fmt_num(xv)
            );
            let _ = write!(
                self.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                y.map(yv) + 4.0,
                fmt_num(yv)
            );
        }
        let _ = write!(
            self.out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 16.0,
            esc(xlabel)
        );
        let _ = write!(
            self.out,
            r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            esc(ylabel)
        );
    }

    fn polyline(&mut self, pts: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
        let pts: Vec<String> = pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if dashed { r#" stroke-dasharray="4 4""# } else { "" };
        let _ = write!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            pts.join(" ")
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = write!(
            self.out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Blue-white-red ramp over `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (lo, mid, hi) = ((44.0, 123.0, 182.0), (255.0, 255.0, 255.0), (215.0, 25.0, 28.0));
    let mix = |a: f64, b: f64, u: f64| (a + (b - a) * u).round() as u8;
    let (r, g, b) = if t < 0.5 {
        let u = t * 2.0;
        (mix(lo.0, mid.0, u), mix(lo.1, mid.1, u), mix(lo.2, mid.2, u))
    } else {
        let u = (t - 0.5) * 2.0;
        (mix(mid.0, hi.0, u), mix(mid.1, hi.1, u), mix(mid.2, hi.2, u))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn render(plot: &PlotData) -> String {
    let subtitle = format!("{} ({})", plot.meta.features.join(", "), plot.meta.dataset);
    match &plot.plot {
        PlotPayload::Roc(r) => roc(r, &subtitle),
        PlotPayload::ProbabilityScores(h) => scores(h, &subtitle),
        PlotPayload::Partial2d(p) => partial(p, &plot.meta.features),
        PlotPayload::SegmentedLoss(s) => segmented(s, &plot.meta.features),
    }
}

fn roc(r: &RocCurve, subtitle: &str) -> String {
    let mut c = Canvas::new(&format!("ROC, AUC = {:.3}: {subtitle}", r.auc));
    let (xa, xb) = Canvas::x_axis();
    let (ya, yb) = Canvas::y_axis();
    let x = Axis::new(0.0, 1.0, xa, xb);
    let y = Axis::new(0.0, 1.0, ya, yb);
    c.frame(x, y, "false positive rate", "true positive rate");
    c.polyline([(x.map(0.0), y.map(0.0)), (x.map(1.0), y.map(1.0))].into_iter(), "gray", true);
    c.polyline(r.fpr.iter().zip(&r.tpr).map(|(f, t)| (x.map(*f), y.map(*t))), CLASS0, false);
    c.finish()
}

fn scores(h: &ScoreHistograms, subtitle: &str) -> String {
    let mut c = Canvas::new(&format!("Probability scores: {subtitle}"));
    let (xa, xb) = Canvas::x_axis();
    let (ya, yb) = Canvas::y_axis();
    let top = h.counts0.iter().chain(&h.counts1).copied().max().unwrap_or(1).max(1) as f64;
    let x = Axis::new(0.0, 1.0, xa, xb);
    let y = Axis::new(0.0, top, ya, yb);
    c.frame(x, y, "predicted probability", "count");
    for (counts, color) in [(&h.counts0, CLASS0), (&h.counts1, CLASS1)] {
        for (i, &n) in counts.iter().enumerate() {
            let (l, r) = (x.map(h.edges[i]), x.map(h.edges[i + 1]));
            c.rect(l, y.map(n as f64), r - l, y.map(0.0) - y.map(n as f64), color, 0.5);
        }
    }
    c.finish()
}

fn partial(p: &Partial2d, features: &[String]) -> String {
    let name = |i: usize| features.get(i).map_or("", String::as_str);
    let mut c = Canvas::new(&format!("Partial dependence: {} vs {}", name(0), name(1)));
    let (xa, xb) = Canvas::x_axis();
    let (ya, yb) = Canvas::y_axis();
    let x = Axis::new(p.x_edges[0], *p.x_edges.last().unwrap_or(&1.0), xa, xb);
    let y = Axis::new(p.y_edges[0], *p.y_edges.last().unwrap_or(&1.0), ya, yb);
    let values = p.grid.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let probability = lo >= 0.0 && hi <= 1.0;
    let (lo, hi) = if probability { (0.0, 1.0) } else { (lo, hi) };
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    for (j, row) in p.grid.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let (l, r) = (x.map(p.x_edges[i]), x.map(p.x_edges[i + 1]));
            let (b, t) = (y.map(p.y_edges[j]), y.map(p.y_edges[j + 1]));
            c.rect(l, t, r - l + 0.5, b - t + 0.5, &ramp(norm(*v)), 1.0);
        }
    }
    for s in &p.scatter {
        let fill = if probability {
            if s.label >= 0.5 { CLASS1 } else { CLASS0 }
        } else {
            &ramp(norm(s.label))
        };
        let _ = write!(
            c.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="black" stroke-width="0.5"/>"#,
            x.map(s.x),
            y.map(s.y)
        );
    }
    c.frame(x, y, name(0), name(1));
    c.finish()
}

fn segmented(s: &SegmentedLoss, features: &[String]) -> String {
    let by = features.first().map_or("", String::as_str);
    let mut c = Canvas::new(&format!("Segmented loss by {by}"));
    let (xa, xb) = Canvas::x_axis();
    let (ya, yb) = Canvas::y_axis();
    let top = s.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let max_loss = s.mean_loss.iter().flatten().copied().fold(0.0, f64::max);
    let bins: Vec<(f64, f64)> = match (&s.edges, &s.categories) {
        (Some(e), _) => e.windows(2).map(|w| (w[0], w[1])).collect(),
        (None, _) => (0..s.counts.len()).map(|i| (i as f64, i as f64 + 1.0)).collect(),
    };
    let lo = bins.first().map_or(0.0, |b| b.0);
    let hi = bins.last().map_or(1.0, |b| b.1);
    let x = Axis::new(lo, hi, xa, xb);
    let y = Axis::new(0.0, top, ya, yb);
    let loss_axis = Axis::new(0.0, if max_loss > 0.0 { max_loss } else { 1.0 }, ya, yb);
    for ((l, r), &n) in bins.iter().zip(&s.counts) {
        let (l, r) = (x.map(*l), x.map(*r));
        c.rect(l + 1.0, y.map(n as f64), r - l - 2.0, y.map(0.0) - y.map(n as f64), CLASS0, 0.6);
    }
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .zip(&s.mean_loss)
        .filter_map(|((l, r), m)| m.map(|m| (x.map((l + r) / 2.0), loss_axis.map(m))))
        .collect();
    c.polyline(pts.into_iter(), LOSS, false);
    if let Some(cats) = &s.categories {
        for (i, name) in cats.iter().enumerate() {
            let _ = write!(
                c.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x.map(i as f64 + 0.5),
                TOP + 14.0,
                esc(name)
            );
        }
    }
    let _ = write!(
        c.out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end" fill="{LOSS}">max mean loss {}</text>"#,
        W - RIGHT - 4.0,
        TOP - 4.0,
        fmt_num(max_loss)
    );
    c.frame(x, y, by, "count");
    c.finish()
}
