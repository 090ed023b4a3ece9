use std::fmt::Write;

/// Fixed palette, cycled by series index.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

/// Horizontal dashed reference line with its own band.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    /// Palette index, or `None` for gray.
    pub color: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Tick values; points are placed at the tick with equal `x`.
    pub x_ticks: Vec<f64>,
    pub series: Vec<Series>,
    pub references: Vec<Reference>,
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn num(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    format!("{r}")
}

fn tick_label(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", (x * 1e4).round() / 1e4)
    }
}

fn y_range(chart: &Chart) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let spans = chart
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| (p.mean, p.stderr)))
        .chain(chart.references.iter().map(|r| (r.mean, r.stderr)));
    for (m, e) in spans.filter(|(m, e)| m.is_finite() && e.is_finite()) {
        lo = lo.min(m - e);
        hi = hi.max(m + e);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Renders a categorical-x line chart: one line per series at its mean with a
/// shaded band of one standard error, references as dashed lines.
pub fn render(chart: &Chart) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let (y_lo, y_hi) = y_range(chart);
    let n_ticks = chart.x_ticks.len().max(1);
    let px = |x: f64| -> f64 {
        let i = chart.x_ticks.iter().position(|&t| t == x).unwrap_or(0);
        if n_ticks == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n_ticks - 1) as f64
        }
    };
    let py = |y: f64| TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        num(LEFT + plot_w / 2.0),
        escape(&chart.title)
    );

    // axes and ticks
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP + plot_h, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
        num(x0),
        num(y1),
        num(x0),
        num(y0),
        num(x1),
        num(y0)
    );
    for &t in &chart.x_ticks {
        let x = px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
            num(x),
            num(y0),
            num(y0 + 5.0),
            num(y0 + 19.0),
            tick_label(t)
        );
    }
    for k in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#dddddd"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##,
            num(x0),
            num(y),
            num(x1),
            num(x0 - 6.0),
            num(y + 4.0),
            tick_label((v * 1000.0).round() / 1000.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(LEFT + plot_w / 2.0),
        num(HEIGHT - 12.0),
        escape(&chart.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        num(TOP + plot_h / 2.0),
        escape(&chart.y_label)
    );

    for r in &chart.references {
        let c = r.color.map_or("#666666", color);
        let (top, bottom) = (py(r.mean + r.stderr), py(r.mean - r.stderr));
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{c}" fill-opacity="0.08"/>"#,
            num(x0),
            num(top),
            num(plot_w),
            num(bottom - top)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="{c}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            num(x0),
            num(x1),
            num(py(r.mean))
        );
    }

    for (i, s) in chart.series.iter().enumerate() {
        let c = color(i);
        let pts: Vec<&Point> = s.points.iter().filter(|p| p.mean.is_finite()).collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in &pts {
            let _ = write!(band, "{},{} ", num(px(p.x)), num(py(p.mean + p.stderr)));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{},{} ", num(px(p.x)), num(py(p.mean - p.stderr)));
        }
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts.iter().map(|p| format!("{},{}", num(px(p.x)), num(py(p.mean)))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            line.join(" ")
        );
        for p in &pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="3" fill="{c}"/>"#,
                num(px(p.x)),
                num(py(p.mean))
            );
        }
    }

    // legend
    let lx = x1 + 15.0;
    let mut ly = TOP + 10.0;
    for (i, s) in chart.series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}">{6}</text>"#,
            num(lx),
            num(ly),
            num(lx + 20.0),
            color(i),
            num(lx + 26.0),
            num(ly + 4.0),
            escape(&s.label)
        );
        ly += 18.0;
    }
    for r in &chart.references {
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="1.5" stroke-dasharray="6 4"/><text x="{4}" y="{5}">{6}</text>"#,
            num(lx),
            num(ly),
            num(lx + 20.0),
            r.color.map_or("#666666", color),
            num(lx + 26.0),
            num(ly + 4.0),
            escape(&r.label)
        );
        ly += 18.0;
    }
    out.push_str("</svg>\n");
    out
}
