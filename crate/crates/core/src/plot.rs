//! Self-contained SVG charts for trace and Experiment 2 CSV files.
//!
//! The schema is picked from the CSV header:
//!
//! - trace (`k,resval,...`): Res.val against `k` on a log-scale y axis
//! - Experiment 2 per-instance rows: box/whisker of `objective_at_final` per N
//! - Experiment 2 summary: mean ± one sample sd per N, one series per box

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{EXP2_CSV_HEADER, EXP2_SUMMARY_HEADER};
use crate::ippgda::TRACE_CSV_HEADER;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Trace,
    Exp2Runs,
    Exp2Summary,
}

impl Schema {
    pub fn detect(header: &str) -> Result<Self> {
        let h = header.trim();
        if h == TRACE_CSV_HEADER {
            Ok(Schema::Trace)
        } else if h == EXP2_CSV_HEADER {
            Ok(Schema::Exp2Runs)
        } else if h == EXP2_SUMMARY_HEADER {
            Ok(Schema::Exp2Summary)
        } else {
            Err(Error::SchemaMismatch(format!("unrecognized CSV header {h:?}")))
        }
    }
}

struct Table {
    schema: Schema,
    rows: Vec<csv::StringRecord>,
}

fn parse(text: &str) -> Result<Table> {
    let header = text.lines().next().unwrap_or("");
    let schema = Schema::detect(header)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if rows.is_empty() {
        return Err(Error::EmptyPlot("CSV has a header but no rows".into()));
    }
    Ok(Table { schema, rows })
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    row.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::SchemaMismatch(format!("bad field {i} in row {row:?}")))
}

/// Maps data coordinates onto the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = 0.5 * lo.abs().max(1.0);
        (lo - pad, hi + pad)
    }
}

/// Ticks at 1, 2 or 5 times a power of ten, about five per axis.
fn linear_ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
"#,
            WIDTH / 2.0,
            escape(title)
        );
        Self { body }
    }

    fn axes(&mut self, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = write!(
            self.body,
            r#"<line class="axis" x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>
<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>
"#,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0,
            escape(xlabel),
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn xtick(&mut self, px: f64, label: &str) {
        let y = HEIGHT - BOTTOM;
        let _ = write!(
            self.body,
            r#"<line class="xtick" x1="{px:.2}" y1="{y}" x2="{px:.2}" y2="{}" stroke="black"/>
<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>
"#,
            y + 5.0,
            y + 20.0,
            escape(label)
        );
    }

    fn ytick(&mut self, py: f64, label: &str) {
        let _ = write!(
            self.body,
            r##"<line class="ytick" x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>
<line class="grid" x1="{LEFT}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#dddddd"/>
<text x="{}" y="{:.2}" text-anchor="end">{}</text>
"##,
            LEFT - 5.0,
            WIDTH - RIGHT,
            LEFT - 8.0,
            py + 4.0,
            escape(label)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn line(&mut self, class: &str, (x1, y1): (f64, f64), (x2, y2): (f64, f64), color: &str) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}"/>"#
        );
    }

    fn legend(&mut self, labels: &[String]) {
        if labels.len() < 2 {
            return;
        }
        for (i, label) in labels.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT - 130.0;
            let _ = write!(
                self.body,
                r#"<rect class="legend" x="{x}" y="{}" width="12" height="12" fill="{}"/>
<text x="{}" y="{}">{}</text>
"#,
                y - 10.0,
                PALETTE[i % PALETTE.len()],
                x + 18.0,
                y,
                escape(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn trace_svg(rows: &[csv::StringRecord]) -> Result<String> {
    let mut pts = Vec::with_capacity(rows.len());
    for r in rows {
        pts.push((field::<f64>(r, 0)?, field::<f64>(r, 1)?));
    }
    let positive_min = pts
        .iter()
        .map(|p| p.1)
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    // zero residuals are drawn one decade below the smallest positive one
    let floor = if positive_min.is_finite() { positive_min / 10.0 } else { 1e-16 };
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(k, v)| (k, v.max(floor).log10())).collect();

    let kmax = logs.iter().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let lo = logs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
    let mut hi = logs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let frame = Frame {
        x: (0.0, kmax),
        y: (lo, hi),
    };

    let mut svg = Svg::new("Res.val by iteration");
    svg.axes("iteration k", "Res.val (log scale)");
    for k in linear_ticks((0.0, kmax)) {
        svg.xtick(frame.px(k), &fmt_tick(k));
    }
    let decade_step = ((hi - lo) / 8.0).ceil().max(1.0);
    let mut e = lo;
    while e <= hi {
        svg.ytick(frame.py(e), &format!("1e{}", e as i64));
        e += decade_step;
    }
    let pixels: Vec<(f64, f64)> = logs.iter().map(|&(k, v)| (frame.px(k), frame.py(v))).collect();
    svg.polyline(&pixels, PALETTE[0]);
    Ok(svg.finish())
}

/// Groups `(box label, N) → values`, keeping box labels in order of appearance.
struct Grouped {
    boxes: Vec<String>,
    ns: Vec<usize>,
}

fn grouping(rows: &[csv::StringRecord]) -> Result<Grouped> {
    let mut boxes: Vec<String> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in rows {
        let b = r.get(0).unwrap_or("").to_string();
        if !boxes.contains(&b) {
            boxes.push(b);
        }
        let n: usize = field(r, 1)?;
        if !ns.contains(&n) {
            ns.push(n);
        }
    }
    ns.sort_unstable();
    Ok(Grouped { boxes, ns })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn categorical_frame(count: usize, (lo, hi): (f64, f64)) -> Frame {
    Frame {
        x: (-0.5, count as f64 - 0.5),
        y: padded(lo, hi),
    }
}

fn series_offset(s: usize, total: usize) -> f64 {
    let width = 0.7 / total as f64;
    (s as f64 - (total as f64 - 1.0) / 2.0) * width
}

fn exp2_runs_svg(rows: &[csv::StringRecord]) -> Result<String> {
    let g = grouping(rows)?;
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let b = g.boxes.iter().position(|x| x == r.get(0).unwrap_or("")).unwrap();
        let n = g.ns.iter().position(|&x| x == field::<usize>(r, 1).unwrap()).unwrap();
        groups.entry((b, n)).or_default().push(field(r, 3)?);
    }
    let all = groups.values().flatten().copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let frame = categorical_frame(g.ns.len(), (lo, hi));

    let mut svg = Svg::new("Objective at final iterate by sample size");
    svg.axes("sample size N", "objective");
    for t in linear_ticks(frame.y) {
        svg.ytick(frame.py(t), &fmt_tick(t));
    }
    for (i, n) in g.ns.iter().enumerate() {
        svg.xtick(frame.px(i as f64), &n.to_string());
    }
    let half = 0.3 / g.boxes.len() as f64;
    for ((b, n), values) in &mut groups {
        values.sort_by(f64::total_cmp);
        let color = PALETTE[*b % PALETTE.len()];
        let c = *n as f64 + series_offset(*b, g.boxes.len());
        let [min, q1, med, q3, max] = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(values, q));
        let (l, r) = (frame.px(c - half * 0.8), frame.px(c + half * 0.8));
        let mid = frame.px(c);
        let _ = writeln!(
            svg.body,
            r#"<rect class="box" x="{l:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>"#,
            frame.py(q3),
            r - l,
            (frame.py(q1) - frame.py(q3)).max(0.5)
        );
        svg.line("median", (l, frame.py(med)), (r, frame.py(med)), color);
        svg.line("whisker", (mid, frame.py(q3)), (mid, frame.py(max)), color);
        svg.line("whisker", (mid, frame.py(q1)), (mid, frame.py(min)), color);
        for v in [min, max] {
            svg.line("cap", (mid - 4.0, frame.py(v)), (mid + 4.0, frame.py(v)), color);
        }
    }
    svg.legend(&g.boxes);
    Ok(svg.finish())
}

fn exp2_summary_svg(rows: &[csv::StringRecord]) -> Result<String> {
    let g = grouping(rows)?;
    let mut stats: Vec<(usize, usize, f64, f64)> = Vec::new();
    for r in rows {
        let b = g.boxes.iter().position(|x| x == r.get(0).unwrap_or("")).unwrap();
        let n = g.ns.iter().position(|&x| x == field::<usize>(r, 1).unwrap()).unwrap();
        stats.push((b, n, field(r, 3)?, field(r, 4)?));
    }
    let (lo, hi) = stats.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
        (a.min(s.2 - s.3), b.max(s.2 + s.3))
    });
    let frame = categorical_frame(g.ns.len(), (lo, hi));

    let mut svg = Svg::new("Mean objective ± one sd by sample size");
    svg.axes("sample size N", "objective");
    for t in linear_ticks(frame.y) {
        svg.ytick(frame.py(t), &fmt_tick(t));
    }
    for (i, n) in g.ns.iter().enumerate() {
        svg.xtick(frame.px(i as f64), &n.to_string());
    }
    for b in 0..g.boxes.len() {
        let color = PALETTE[b % PALETTE.len()];
        let mut series: Vec<&(usize, usize, f64, f64)> = stats.iter().filter(|s| s.0 == b).collect();
        series.sort_by_key(|s| s.1);
        let mut means = Vec::new();
        for &&(_, n, mean, sd) in &series {
            let x = frame.px(n as f64 + series_offset(b, g.boxes.len()));
            svg.line("whisker", (x, frame.py(mean - sd)), (x, frame.py(mean + sd)), color);
            for v in [mean - sd, mean + sd] {
                svg.line("cap", (x - 4.0, frame.py(v)), (x + 4.0, frame.py(v)), color);
            }
            let _ = writeln!(
                svg.body,
                r#"<circle class="mean" cx="{x:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                frame.py(mean)
            );
            means.push((x, frame.py(mean)));
        }
        svg.polyline(&means, color);
    }
    svg.legend(&g.boxes);
    Ok(svg.finish())
}

/// Renders a trace, Experiment 2 or summary CSV as an 800×500 SVG.
pub fn render_svg(csv_text: &str) -> Result<String> {
    let table = parse(csv_text)?;
    match table.schema {
        Schema::Trace => trace_svg(&table.rows),
        Schema::Exp2Runs => exp2_runs_svg(&table.rows),
        Schema::Exp2Summary => exp2_summary_svg(&table.rows),
    }
}

pub fn emit_plot(csv: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(csv)?;
    let svg = render_svg(&text)?;
    fs::write(out, svg)?;
    Ok(())
}
